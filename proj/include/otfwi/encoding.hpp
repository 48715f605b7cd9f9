#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "otfwi/types.hpp"

namespace otfwi {

enum class EncodingScheme { softplus, add_constant, positive_part };

inline const char* to_string(EncodingScheme s) {
    switch (s) {
        case EncodingScheme::softplus: return "softplus";
        case EncodingScheme::add_constant: return "add_constant";
        default: return "positive_part";
    }
}

/// Parameters of the signed-trace -> positive-density map.
struct EncodingConfig {
    EncodingScheme scheme = EncodingScheme::softplus;
    double beta = 2.0;        ///< steepness, 1/amplitude-units; nonzero for softplus
    double floor_ratio = 0.0; ///< r >= 0: mix r/nt of uniform mass into the output
    double add_c = 1.0;       ///< shift for the add_constant scheme, > 0

    void validate() const {
        if (scheme == EncodingScheme::softplus)
            require(std::isfinite(beta) && beta != 0.0, "EncodingConfig: beta must be nonzero");
        if (scheme == EncodingScheme::add_constant)
            require(std::isfinite(add_c) && add_c > 0.0, "EncodingConfig: add_constant shift must be > 0");
        require(std::isfinite(floor_ratio) && floor_ratio >= 0.0 && floor_ratio < 1.0,
                "EncodingConfig: floor_ratio must lie in [0, 1)");
    }
};

/// A normalized density together with the normalization constant needed to
/// invert the map: mean_mass is the arithmetic mean of the pre-normalization
/// values, so denormalizing multiplies masses by nt * mean_mass.
struct EncodedTrace {
    MassTrace pdf;
    double mean_mass = 0.0;
};

namespace detail {

/// softplus (1/|b|) log(1 + e^{b u}), evaluated overflow-safely.
inline double softplus_stable(double beta, double u) {
    double x = beta * u;
    return (std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)))) / std::fabs(beta);
}

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline EncodedTrace normalize_positive(const TimeGrid& grid, Vec vals, double floor_ratio) {
    const auto n = static_cast<double>(vals.size());
    double mean = kmean(vals);
    require(mean > 0.0, "encoding: pre-normalization values have nonpositive mean");
    EncodedTrace out;
    out.mean_mass = mean;
    double total = n * mean;
    for (auto& v : vals) v /= total;
    if (floor_ratio > 0.0)
        for (auto& v : vals) v = (1.0 - floor_ratio) * v + floor_ratio / n;
    out.pdf = MassTrace{grid, std::move(vals)};
    out.pdf.validate(1e-9);
    return out;
}

}  // namespace detail

/// Softplus map followed by normalization to unit total mass.
inline EncodedTrace softplus_encode(const Trace& u, const EncodingConfig& cfg) {
    cfg.validate();
    u.grid.validate();
    require(all_finite(u.a), "softplus_encode: non-finite input sample");
    require(cfg.beta != 0.0, "softplus_encode: beta must be nonzero");
    Vec vals(u.a.size());
    for (size_t k = 0; k < u.a.size(); ++k) vals[k] = detail::softplus_stable(cfg.beta, u.a[k]);
    return detail::normalize_positive(u.grid, std::move(vals), cfg.floor_ratio);
}

/// Inverse of softplus_encode (exact up to round-off away from the flat tail).
inline Trace softplus_decode(const EncodedTrace& e, const EncodingConfig& cfg) {
    require(cfg.beta != 0.0 && std::isfinite(cfg.beta), "softplus_decode: beta must be nonzero");
    const auto n = static_cast<double>(e.pdf.mass.size());
    Trace out;
    out.grid = e.pdf.grid;
    out.a.resize(e.pdf.mass.size());
    for (size_t k = 0; k < e.pdf.mass.size(); ++k) {
        double v = e.pdf.mass[k] * n * e.mean_mass;
        if (!(v > 0.0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "softplus_decode: denormalized value <= 0 at node %zu", k);
            throw validation_error(buf);
        }
        double x = std::fabs(cfg.beta) * v;
        double lg;  // log(e^x - 1), overflow-safe
        if (x > 30.0) {
            lg = x + std::log1p(-std::exp(-x));
        } else {
            double d = std::max(std::expm1(x), 1e-300);
            lg = std::log(d);
        }
        out.a[k] = lg / cfg.beta;
    }
    return out;
}

/// Adjoint of the Frechet derivative of (normalize . softplus) at u, applied
/// to phi: with sigma the softplus values, M their sum, and s' the pointwise
/// derivative, result_k = s'_k (phi_k - <phi, sigma>/M) / M.
inline Trace encode_adjoint(const Trace& u, const GradTrace& phi, const EncodingConfig& cfg) {
    require_same_grid(u.grid, phi.grid, "encode_adjoint");
    require(cfg.beta != 0.0 && std::isfinite(cfg.beta), "encode_adjoint: beta must be nonzero");
    require(all_finite(u.a) && all_finite(phi.a), "encode_adjoint: non-finite input");
    const size_t n = u.a.size();
    Vec sigma(n);
    KahanSum M;
    for (size_t k = 0; k < n; ++k) {
        sigma[k] = detail::softplus_stable(cfg.beta, u.a[k]);
        M.add(sigma[k]);
    }
    double total = M.value();
    require(total > 0.0, "encode_adjoint: degenerate softplus mass");
    KahanSum inner;
    for (size_t k = 0; k < n; ++k) inner.add(phi.a[k] * sigma[k]);
    double centered = inner.value() / total;
    double sgn = cfg.beta > 0.0 ? 1.0 : -1.0;
    Trace out;
    out.grid = u.grid;
    out.a.resize(n);
    double scale = 1.0 - cfg.floor_ratio;
    for (size_t k = 0; k < n; ++k) {
        double sp = sgn * detail::logistic(cfg.beta * u.a[k]);
        out.a[k] = scale * sp * (phi.a[k] - centered) / total;
    }
    return out;
}

/// Shift-and-normalize encoding (u + c)/<u + c>, for the geodesic comparison.
inline EncodedTrace add_constant_encode(const Trace& u, double c) {
    u.grid.validate();
    require(std::isfinite(c), "add_constant_encode: shift must be finite");
    require(all_finite(u.a), "add_constant_encode: non-finite input sample");
    Vec vals(u.a.size());
    for (size_t k = 0; k < u.a.size(); ++k) {
        vals[k] = u.a[k] + c;
        if (!(vals[k] > 0.0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "add_constant_encode: nonpositive shifted value at node %zu", k);
            throw validation_error(buf);
        }
    }
    return detail::normalize_positive(u.grid, std::move(vals), 0.0);
}

/// Pointwise max(u, 0).
inline Trace positive_part(const Trace& u) {
    Trace out = u;
    for (auto& v : out.a) v = std::max(v, 0.0);
    return out;
}

/// Scheme dispatcher used by the misfit layer.
inline EncodedTrace encode(const Trace& u, const EncodingConfig& cfg) {
    cfg.validate();
    switch (cfg.scheme) {
        case EncodingScheme::softplus: return softplus_encode(u, cfg);
        case EncodingScheme::add_constant: return add_constant_encode(u, cfg.add_c);
        default: {
            Trace pos = positive_part(u);
            require(all_finite(pos.a), "encode: non-finite input sample");
            return detail::normalize_positive(u.grid, std::move(pos.a), cfg.floor_ratio);
        }
    }
}

}  // namespace otfwi
