#include <catch2/catch_amalgamated.hpp>

#include "otfwi/encoding.hpp"
#include "otfwi/ot.hpp"
#include "otfwi/signal.hpp"

using namespace otfwi;

namespace {

Trace tr(double dt, Vec a, double t0 = 0.0) {
    TimeGrid g{static_cast<int64_t>(a.size()), dt, t0};
    return Trace{g, std::move(a)};
}

Vec prenorm(const EncodedTrace& e) {
    Vec v = e.pdf.mass;
    double total = static_cast<double>(v.size()) * e.mean_mass;
    for (auto& x : v) x *= total;
    return v;
}

}  // namespace

TEST_CASE("softplus encode: constant input gives the uniform density", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 1.0;
    auto e = softplus_encode(tr(0.1, Vec(4, 0.0)), cfg);
    for (double m : e.pdf.mass) CHECK(m == Catch::Approx(0.25).margin(1e-15));
    CHECK(e.mean_mass == Catch::Approx(std::log(2.0)).margin(1e-14));
}

TEST_CASE("softplus encode: large beta approaches the positive part", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 100.0;
    auto v = prenorm(softplus_encode(tr(1.0, {-1.0, 2.0}), cfg));
    CHECK(std::fabs(v[0] - 0.0) < 1e-4);
    CHECK(std::fabs(v[1] - 2.0) < 1e-4);
}

TEST_CASE("softplus encode: huge samples do not overflow", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 1.0;
    auto v = prenorm(softplus_encode(tr(1.0, {0.0, 1000.0}), cfg));
    CHECK(v[1] == 1000.0);

    cfg.beta = -3.0;
    CHECK_NOTHROW(softplus_encode(tr(1.0, {-1e4, 1e4, 0.5}), cfg));
}

TEST_CASE("softplus encode rejects bad input", "[encoding]") {
    EncodingConfig cfg;
    CHECK_THROWS_AS(softplus_encode(tr(1.0, {0.0, std::nan("")}), cfg), validation_error);
    cfg.beta = 0.0;
    CHECK_THROWS_AS(softplus_encode(tr(1.0, {0.0, 1.0}), cfg), validation_error);
}

TEST_CASE("softplus decode inverts encode", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 2.0;
    TimeGrid g{501, 0.002, 0.0};
    auto u = ricker(10.0, g, 0.5);
    auto rt = softplus_decode(softplus_encode(u, cfg), cfg);
    double worst = 0.0;
    for (size_t k = 0; k < u.a.size(); ++k) worst = std::max(worst, std::fabs(rt.a[k] - u.a[k]));
    CHECK(worst <= 1e-6);

    Rng rng(21);
    Trace w = u;
    for (auto& x : w.a) x = rng.uniform(-2.0, 2.0);
    auto rt2 = softplus_decode(softplus_encode(w, cfg), cfg);
    for (size_t k = 0; k < w.a.size(); ++k)
        CHECK(std::fabs(rt2.a[k] - w.a[k]) <= 1e-10 * std::max(1.0, std::fabs(w.a[k])));
}

TEST_CASE("softplus decode: closed form and domain errors", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 1.0;
    EncodedTrace e;
    e.pdf = MassTrace{TimeGrid{2, 1.0, 0.0}, {0.5, 0.5}};
    e.mean_mass = std::log(2.0);
    auto u = softplus_decode(e, cfg);  // denormalized values are log 2
    CHECK(std::fabs(u.a[0]) < 1e-14);
    CHECK(std::fabs(u.a[1]) < 1e-14);

    EncodedTrace bad;
    bad.pdf = MassTrace{TimeGrid{2, 1.0, 0.0}, {0.0, 1.0}};
    bad.mean_mass = 0.5;
    CHECK_THROWS_AS(softplus_decode(bad, cfg), validation_error);
}

TEST_CASE("encode adjoint annihilates constants", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 3.0;
    Rng rng(22);
    Trace u = tr(0.01, Vec(64));
    for (auto& x : u.a) x = rng.uniform(-1.0, 1.0);
    GradTrace phi;
    phi.grid = u.grid;
    phi.a.assign(64, 7.25);
    auto out = encode_adjoint(u, phi, cfg);
    for (double v : out.a) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("encode adjoint matches the directional derivative of encode", "[encoding]") {
    Rng rng(23);
    const int64_t n = 48;
    const double eps = 1e-6;
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        EncodingConfig cfg;
        cfg.beta = rng.uniform(0.5, 4.0) * (rep % 2 ? 1.0 : -1.0);
        Trace u = tr(0.01, Vec(n)), h = u;
        GradTrace phi;
        phi.grid = u.grid;
        phi.a.resize(n);
        for (int64_t k = 0; k < n; ++k) {
            u.a[k] = rng.uniform(-1.5, 1.5);
            h.a[k] = rng.normal();
            phi.a[k] = rng.normal();
        }
        auto adj = encode_adjoint(u, phi, cfg);
        double lhs = 0.0;
        for (int64_t k = 0; k < n; ++k) lhs += adj.a[k] * h.a[k];

        Trace up = u, um = u;
        for (int64_t k = 0; k < n; ++k) {
            up.a[k] += eps * h.a[k];
            um.a[k] -= eps * h.a[k];
        }
        auto ep = softplus_encode(up, cfg), em = softplus_encode(um, cfg);
        double rhs = 0.0;
        for (int64_t k = 0; k < n; ++k)
            rhs += phi.a[k] * (ep.pdf.mass[k] - em.pdf.mass[k]) / (2 * eps);
        worst = std::max(worst, std::fabs(lhs - rhs) / std::max(std::fabs(rhs), 1e-300));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("encode adjoint: constant-input closed form", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 1.0;
    const int64_t n = 16;
    Trace u = tr(0.5, Vec(n, 0.0));
    Rng rng(24);
    GradTrace phi;
    phi.grid = u.grid;
    phi.a.resize(n);
    double mean = 0.0;
    for (auto& v : phi.a) {
        v = rng.normal();
        mean += v;
    }
    mean /= double(n);
    auto out = encode_adjoint(u, phi, cfg);
    double scale = 0.5 / (double(n) * std::log(2.0));
    for (int64_t k = 0; k < n; ++k)
        CHECK(out.a[k] == Catch::Approx((phi.a[k] - mean) * scale).margin(1e-12));
}

TEST_CASE("add-constant encode: uniform density and positivity", "[encoding]") {
    auto e = add_constant_encode(tr(1.0, Vec(5, 0.0)), 1.0);
    for (double m : e.pdf.mass) CHECK(m == Catch::Approx(0.2).margin(1e-15));

    TimeGrid g{401, 0.005, 0.0};
    auto w = ricker(5.0, g, 0.6);
    double mn = *std::min_element(w.a.begin(), w.a.end());
    auto e2 = add_constant_encode(w, 1.1 * std::fabs(mn));
    for (double m : e2.pdf.mass) CHECK(m > 0.0);

    CHECK_THROWS_AS(add_constant_encode(w, 0.5 * std::fabs(mn)), validation_error);
}

TEST_CASE("positive part: clipping and large-beta softplus limit", "[encoding]") {
    auto p = positive_part(tr(1.0, {-1.0, 2.0}));
    CHECK(p.a == Vec{0.0, 2.0});
    auto z = positive_part(tr(1.0, {-3.0, -0.5, -1e9}));
    CHECK(z.a == Vec{0.0, 0.0, 0.0});

    TimeGrid g{301, 0.004, 0.0};
    auto w = ricker(8.0, g, 0.4);  // unit amplitude
    EncodingConfig cfg;
    cfg.beta = 1e3;
    auto v = prenorm(softplus_encode(w, cfg));
    auto wp = positive_part(w);
    double sup = 0.0;
    for (size_t k = 0; k < v.size(); ++k) sup = std::max(sup, std::fabs(v[k] - wp.a[k]));
    CHECK(sup < 1e-3);
}

TEST_CASE("softplus approaches the positive part monotonically in beta", "[encoding]") {
    TimeGrid g{301, 0.004, 0.0};
    auto w = ricker(8.0, g, 0.4);
    auto wp = positive_part(w);
    double prev = 1e300;
    for (double beta : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0}) {
        EncodingConfig cfg;
        cfg.beta = beta;
        auto v = prenorm(softplus_encode(w, cfg));
        double sup = 0.0;
        for (size_t k = 0; k < v.size(); ++k) sup = std::max(sup, std::fabs(v[k] - wp.a[k]));
        CHECK(sup <= prev + 1e-15);
        prev = sup;
    }
    CHECK(prev < 1e-3);  // uniform convergence: the sup norm itself shrinks
}

TEST_CASE("floor ratio bounds the output masses from below", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 5.0;
    cfg.floor_ratio = 0.1;
    Rng rng(25);
    Trace u = tr(0.01, Vec(128));
    for (auto& x : u.a) x = rng.uniform(-3.0, 3.0);
    auto e = softplus_encode(u, cfg);
    for (double m : e.pdf.mass) CHECK(m >= 0.1 / 128.0 - 1e-15);
    CHECK_NOTHROW(e.pdf.validate(1e-9));
}

TEST_CASE("encoding commutes with windowing before normalization", "[encoding]") {
    EncodingConfig cfg;
    cfg.beta = 2.5;
    Rng rng(26);
    Trace u = tr(0.01, Vec(100));
    for (auto& x : u.a) x = rng.uniform(-2.0, 2.0);
    auto full = prenorm(softplus_encode(u, cfg));

    Trace w = tr(0.01, Vec(u.a.begin() + 20, u.a.begin() + 60), 0.2);
    auto win = prenorm(softplus_encode(w, cfg));
    for (size_t k = 0; k < win.size(); ++k)
        CHECK(win[k] == Catch::Approx(full[k + 20]).epsilon(1e-12));
}

TEST_CASE("scheme dispatcher covers all encodings", "[encoding]") {
    Rng rng(27);
    Trace u = tr(0.01, Vec(32));
    for (auto& x : u.a) x = rng.uniform(-1.0, 1.0);

    EncodingConfig cfg;
    cfg.scheme = EncodingScheme::softplus;
    CHECK(encode(u, cfg).pdf.mass == softplus_encode(u, cfg).pdf.mass);

    cfg.scheme = EncodingScheme::add_constant;
    cfg.add_c = 2.0;
    CHECK(encode(u, cfg).pdf.mass == add_constant_encode(u, 2.0).pdf.mass);

    cfg.scheme = EncodingScheme::positive_part;
    cfg.floor_ratio = 0.05;
    auto e = encode(u, cfg);
    CHECK_NOTHROW(e.pdf.validate(1e-9));
    for (double m : e.pdf.mass) CHECK(m >= 0.05 / 32.0 - 1e-15);
}

TEST_CASE("geodesic of encoded shifted wavelets travels under softplus", "[encoding]") {
    // A wavelet and its 0.6 s translate, encoded steeply: the displacement
    // midpoint concentrates at the halfway shift.
    TimeGrid g{401, 0.005, 0.0};
    auto p0 = ricker(5.0, g, 0.6);
    auto p1 = ricker(5.0, g, 1.2);
    EncodingConfig cfg;
    cfg.beta = 50.0;
    auto e0 = softplus_encode(p0, cfg), e1 = softplus_encode(p1, cfg);
    auto mid = displacement_interpolation(e0.pdf, e1.pdf, 0.5);
    size_t arg = 0;
    for (size_t k = 1; k < mid.mass.size(); ++k)
        if (mid.mass[k] > mid.mass[arg]) arg = k;
    CHECK(std::fabs(g.node(static_cast<int64_t>(arg)) - 0.9) <= g.dt + 1e-12);
}

TEST_CASE("geodesic under add-constant encoding transports only locally", "[encoding]") {
    TimeGrid g{401, 0.005, 0.0};
    auto p0 = ricker(5.0, g, 0.6);
    auto p1 = ricker(5.0, g, 1.2);
    double mn = *std::min_element(p0.a.begin(), p0.a.end());
    double c = 1.1 * std::fabs(mn);
    auto e0 = add_constant_encode(p0, c), e1 = add_constant_encode(p1, c);
    auto mid = displacement_interpolation(e0.pdf, e1.pdf, 0.5);
    auto at = [&](double t) { return mid.mass[static_cast<size_t>(std::llround(t / g.dt))]; };
    // mass stays near both endpoints instead of traveling to the midpoint
    CHECK(at(0.6) > at(0.9));
    CHECK(at(1.2) > at(0.9));
}
