#pragma once

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "otfwi/config.hpp"
#include "otfwi/encoding.hpp"
#include "otfwi/io.hpp"
#include "otfwi/misfit.hpp"
#include "otfwi/model.hpp"
#include "otfwi/optimize.hpp"
#include "otfwi/ot.hpp"
#include "otfwi/signal.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw validation_error(dir + ": cannot create output directory: " + ec.message());
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

/// "0.8" -> "0p8", "-2" -> "m2": keeps beta values usable inside file names.
inline std::string beta_tag(double b) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", b);
    std::string out;
    for (char c : std::string(buf)) {
        if (c == '.') out += 'p';
        else if (c == '-') out += 'm';
        else if (c != '+') out += c;
    }
    return out;
}

inline std::string shot_filename(size_t shot) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "gather_%03zu.bin", shot);
    return buf;
}

/// Forward solves for every shot, keeping only the gathers.
inline std::vector<ShotGather> simulate_all_shots(const SlownessModel& model,
                                                  const Acquisition& acq, const SimParams& params) {
    SimParams p = params;
    p.snapshot_stride = std::max<int64_t>(acq.n_steps(), 1);
    std::vector<ShotGather> out;
    out.reserve(acq.sources.size());
    for (size_t s = 0; s < acq.sources.size(); ++s)
        out.push_back(simulate_forward(model, acq, s, p).gather);
    return out;
}

inline double total_misfit(const std::vector<ShotGather>& syn, const std::vector<ShotGather>& obs,
                           const ObjectiveSpec& spec) {
    KahanSum total;
    for (size_t s = 0; s < syn.size(); ++s) total.add(evaluate_misfit(syn[s], obs[s], spec).value);
    return total.value();
}

}  // namespace detail

/// Simulates every shot of the configured acquisition on the configured model
/// and writes one gather file per shot, plus the model itself.
inline void cmd_forward(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.need_model("forward");
    cfg.need_acquisition("forward");
    SlownessModel model = cfg.build_model();
    model.validate();
    Acquisition acq = cfg.build_acquisition(model);
    detail::ensure_dir(cfg.out_dir);

    write_model(cfg.out_dir + "/model.bin", model);
    log << "forward: " << acq.sources.size() << " shots, " << acq.receivers.size()
        << " receivers, dt = " << acq.dt_sim << " s, " << acq.n_steps() << " steps\n";
    SimParams p = cfg.sim;
    p.snapshot_stride = std::max<int64_t>(acq.n_steps(), 1);
    for (size_t s = 0; s < acq.sources.size(); ++s) {
        ShotGather g = simulate_forward(model, acq, s, p).gather;
        std::string path = cfg.out_dir + "/" + detail::shot_filename(s);
        write_gather(path, g);
        log << "  wrote " << path << " (" << g.receivers.size() << " traces, " << g.grid.nt
            << " samples)\n";
    }
}

/// Misfit surfaces over a grid of velocity-gradient models c(z) = v0 + alpha z
/// below a water layer.  Reference data is simulated once at (ref_v0,
/// ref_alpha); every surface is normalized by its own maximum and written as
/// one CSV per objective.
inline void cmd_landscape(const ExperimentConfig& cfg, std::ostream& log) {
    const LandscapeSpec& l = cfg.need(cfg.landscape, "landscape", "landscape");
    cfg.need_acquisition("landscape");

    auto scan_model = [&](double v0, double alpha) {
        SlownessModel m = linear_gradient_model(l.nx, l.nz, l.dx, l.dz, v0, alpha, l.water_depth,
                                                l.water_c);
        try {
            m.validate();
        } catch (const validation_error& e) {
            throw validation_error("landscape: scan point v0 = " + detail::fmt(v0) + ", alpha = " +
                                   detail::fmt(alpha) + " violates the velocity envelope (" +
                                   e.what() + ")");
        }
        return m;
    };
    auto v0_at = [&](int64_t i) {
        return l.v0_min + (l.v0_max - l.v0_min) * static_cast<double>(i) /
                              static_cast<double>(l.v0_count - 1);
    };
    auto alpha_at = [&](int64_t j) {
        return l.alpha_min + (l.alpha_max - l.alpha_min) * static_cast<double>(j) /
                                 static_cast<double>(l.alpha_count - 1);
    };

    // validate the whole scan (and find the fastest model) before simulating
    double c_worst = l.water_c;
    for (int64_t i = 0; i < l.v0_count; ++i)
        for (int64_t j = 0; j < l.alpha_count; ++j)
            c_worst = std::max(c_worst, scan_model(v0_at(i), alpha_at(j)).c_max());
    SlownessModel ref = scan_model(l.ref_v0, l.ref_alpha);
    c_worst = std::max(c_worst, ref.c_max());

    // one time step for the whole scan, stable for its fastest model
    SlownessModel fastest = homogeneous_model(l.nx, l.nz, l.dx, l.dz, c_worst);
    const AcqSpec& aspec = cfg.need_acquisition("landscape");
    double dts = aspec.dt > 0.0 ? aspec.dt : choose_dt(fastest, aspec.record_t, cfg.sim.cfl_safety);
    Acquisition acq = cfg.build_acquisition(fastest, dts);

    // one damping profile for the whole scan, so surface values differ only
    // through the model itself
    SimParams params = cfg.sim;
    if (params.pml_velocity == 0.0) params.pml_velocity = c_worst;

    log << "landscape: " << l.v0_count << " x " << l.alpha_count << " scan, dt = " << acq.dt_sim
        << " s, reference (" << l.ref_v0 << ", " << l.ref_alpha << ")\n";
    std::vector<ShotGather> obs = detail::simulate_all_shots(ref, acq, params);

    std::vector<ObjectiveSpec> objectives;
    std::vector<std::string> names;
    ObjectiveSpec l2;
    l2.kind = MisfitKind::l2;
    objectives.push_back(l2);
    names.push_back("l2");
    for (double b : l.betas) {
        ObjSpec o;
        o.kind = MisfitKind::w2;
        o.beta = b;
        o.floor_ratio = l.floor_ratio;
        objectives.push_back(o.spec());
        names.push_back("w2_beta" + detail::beta_tag(b));
    }

    size_t n_obj = objectives.size();
    std::vector<Vec> surfaces(n_obj,
                              Vec(static_cast<size_t>(l.v0_count * l.alpha_count), 0.0));
    for (int64_t i = 0; i < l.v0_count; ++i) {
        for (int64_t j = 0; j < l.alpha_count; ++j) {
            SlownessModel m = scan_model(v0_at(i), alpha_at(j));
            std::vector<ShotGather> syn = detail::simulate_all_shots(m, acq, params);
            for (size_t o = 0; o < n_obj; ++o)
                surfaces[o][static_cast<size_t>(i * l.alpha_count + j)] =
                    detail::total_misfit(syn, obs, objectives[o]);
        }
        log << "  row " << (i + 1) << "/" << l.v0_count << " done\n";
    }

    detail::ensure_dir(cfg.out_dir);
    for (size_t o = 0; o < n_obj; ++o) {
        double vmax = 0.0;
        for (double v : surfaces[o]) vmax = std::max(vmax, v);
        if (!(vmax > 0.0))
            throw numerical_error("landscape: surface " + names[o] + " is identically zero");
        std::string csv = "v0,alpha,value\n";
        for (int64_t i = 0; i < l.v0_count; ++i)
            for (int64_t j = 0; j < l.alpha_count; ++j)
                csv += detail::fmt(v0_at(i)) + "," + detail::fmt(alpha_at(j)) + "," +
                       detail::fmt(surfaces[o][static_cast<size_t>(i * l.alpha_count + j)] / vmax) +
                       "\n";
        std::string path = cfg.out_dir + "/landscape_" + names[o] + ".csv";
        detail::write_text_atomic(path, csv);
        log << "  wrote " << path << "\n";
    }
}

/// Interpolation paths between a wavelet and its time-shifted copy under
/// three rules: pointwise blending, and displacement interpolation of the
/// shift-and-normalize and softplus encodings.  One CSV per rule with the
/// path sampled at five equally spaced parameters.
inline void cmd_geodesic(const ExperimentConfig& cfg, std::ostream& log) {
    const GeodesicSpec& g = cfg.need(cfg.geodesic, "geodesic", "geodesic");
    TimeGrid grid{g.nt, g.dt, g.t0};
    grid.validate();
    Trace p0 = ricker(g.f_peak, grid, g.delay);
    Trace p1 = ricker(g.f_peak, grid, g.delay + g.shift);
    const double alphas[] = {0.0, 0.25, 0.5, 0.75, 1.0};

    detail::ensure_dir(cfg.out_dir);
    auto write_path = [&](const std::string& name, const std::vector<Vec>& cols) {
        std::string csv = "t,alpha0,alpha25,alpha50,alpha75,alpha100\n";
        for (int64_t k = 0; k < g.nt; ++k) {
            csv += detail::fmt(grid.node(k));
            for (const Vec& c : cols) csv += "," + detail::fmt(c[static_cast<size_t>(k)]);
            csv += "\n";
        }
        std::string path = cfg.out_dir + "/geodesic_" + name + ".csv";
        detail::write_text_atomic(path, csv);
        log << "  wrote " << path << "\n";
    };
    auto peak_time = [&](const Vec& v) {
        size_t best = 0;
        for (size_t k = 1; k < v.size(); ++k)
            if (v[k] > v[best]) best = k;
        return grid.node(static_cast<int64_t>(best));
    };

    std::vector<Vec> blend;
    for (double a : alphas) {
        Vec v(static_cast<size_t>(g.nt));
        for (size_t k = 0; k < v.size(); ++k) v[k] = (1.0 - a) * p0.a[k] + a * p1.a[k];
        blend.push_back(std::move(v));
    }
    write_path("l2", blend);

    EncodedTrace ac0 = add_constant_encode(p0, g.add_c);
    EncodedTrace ac1 = add_constant_encode(p1, g.add_c);
    std::vector<Vec> add_cols;
    for (double a : alphas) add_cols.push_back(displacement_interpolation(ac0.pdf, ac1.pdf, a).mass);
    write_path("add_constant", add_cols);

    EncodingConfig enc;
    enc.scheme = EncodingScheme::softplus;
    enc.beta = g.beta;
    EncodedTrace sp0 = softplus_encode(p0, enc);
    EncodedTrace sp1 = softplus_encode(p1, enc);
    std::vector<Vec> sp_cols;
    for (double a : alphas) sp_cols.push_back(displacement_interpolation(sp0.pdf, sp1.pdf, a).mass);
    log << "geodesic: blend midpoint peak at " << peak_time(blend[2]) << " s, softplus midpoint peak at "
        << peak_time(sp_cols[2]) << " s\n";
    write_path("softplus", sp_cols);
}

/// Transport distance between a flat density and single-frequency
/// perturbations of it, against the frequency index.  The matching quadratic
/// misfits are written alongside; the transport column must decrease
/// strictly with frequency while the quadratic one stays flat.
inline void cmd_freqscan(const ExperimentConfig& cfg, std::ostream& log) {
    const FreqscanSpec& f = cfg.need(cfg.freqscan, "freqscan", "freqscan");
    double dt = f.period / static_cast<double>(f.nt);
    TimeGrid grid{f.nt, dt, 0.0};
    size_t n = static_cast<size_t>(f.nt);

    MassTrace p0{grid, Vec(n, 1.0 / static_cast<double>(f.nt))};
    std::vector<double> transport(static_cast<size_t>(f.k_max));
    std::vector<double> quad(static_cast<size_t>(f.k_max));
    for (int64_t k = 1; k <= f.k_max; ++k) {
        Vec mass(n);
        KahanSum total;
        for (size_t j = 0; j < n; ++j) {
            double t = grid.node(static_cast<int64_t>(j));
            mass[j] = 1.0 + f.amp * std::sin(2.0 * M_PI * static_cast<double>(k) * t / f.period);
            total.add(mass[j]);
        }
        for (auto& v : mass) v /= total.value();
        MassTrace pk{grid, std::move(mass)};
        transport[static_cast<size_t>(k - 1)] = transport_cost(p0, pk);
        KahanSum q;
        for (size_t j = 0; j < n; ++j) {
            double d = pk.mass[j] - p0.mass[j];
            q.add(d * d);
        }
        quad[static_cast<size_t>(k - 1)] = 0.5 * q.value() * dt;
    }

    detail::ensure_dir(cfg.out_dir);
    std::string csv = "k,transport,l2\n";
    for (int64_t k = 1; k <= f.k_max; ++k)
        csv += std::to_string(k) + "," + detail::fmt(transport[static_cast<size_t>(k - 1)]) + "," +
               detail::fmt(quad[static_cast<size_t>(k - 1)]) + "\n";
    std::string path = cfg.out_dir + "/freqscan.csv";
    detail::write_text_atomic(path, csv);
    log << "freqscan: wrote " << path << "\n";
    for (int64_t k = 1; k <= f.k_max; ++k)
        log << "  k = " << k << "  transport = " << transport[static_cast<size_t>(k - 1)]
            << "  l2 = " << quad[static_cast<size_t>(k - 1)] << "\n";

    for (size_t k = 1; k < transport.size(); ++k)
        if (!(transport[k] < transport[k - 1]))
            throw numerical_error("freqscan: transport distance failed to decrease from k = " +
                                  std::to_string(k) + " to " + std::to_string(k + 1));
    double qmin = quad[0], qmax = quad[0];
    for (double q : quad) {
        qmin = std::min(qmin, q);
        qmax = std::max(qmax, q);
    }
    if (!((qmax - qmin) / qmax < 0.05))
        throw numerical_error("freqscan: quadratic misfit varies more than 5% across frequencies");
}

struct CheckLine {
    std::string name;
    double measured = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<CheckLine> lines;

    bool all_pass() const {
        for (const auto& l : lines)
            if (!l.pass) return false;
        return true;
    }
};

/// Derivative consistency battery: transport gradient vs finite differences,
/// encoding adjoint vs finite differences, the forward/adjoint transpose
/// pairing, and full model-space gradients for both objectives probed cell by
/// cell.  gradient_scale multiplies the assembled model gradient before the
/// comparison; anything but 1.0 is fault injection for the self-tests.
inline GradcheckReport run_gradcheck(const ExperimentConfig& cfg, double gradient_scale = 1.0) {
    GradcheckSpec spec = cfg.gradcheck ? *cfg.gradcheck : GradcheckSpec{};
    Rng rng(cfg.seed == 0 ? 1 : cfg.seed);
    GradcheckReport rep;

    {  // transport cost differentiated against its second argument
        TimeGrid grid{64, 1.0 / 64.0, 0.0};
        size_t n = 64;
        double worst = 0.0;
        for (int64_t trial = 0; trial < spec.ot_dirs; ++trial) {
            Vec m0(n), m1(n);
            KahanSum s0, s1;
            for (size_t j = 0; j < n; ++j) {
                m0[j] = rng.uniform(0.2, 1.0);
                m1[j] = rng.uniform(0.2, 1.0);
                s0.add(m0[j]);
                s1.add(m1[j]);
            }
            for (auto& v : m0) v /= s0.value();
            for (auto& v : m1) v /= s1.value();
            Vec d(n);
            KahanSum ds;
            for (auto& v : d) {
                v = rng.uniform(-1.0, 1.0);
                ds.add(v);
            }
            double mean = ds.value() / static_cast<double>(n);
            for (auto& v : d) v -= mean;

            MassTrace p0{grid, m0};
            GradTrace zeta = transport_gradient(p0, MassTrace{grid, m1});
            double directional = 0.0;
            for (size_t j = 0; j < n; ++j) directional += zeta.a[j] * d[j];
            double eps = 1e-7;
            Vec up = m1, dn = m1;
            for (size_t j = 0; j < n; ++j) {
                up[j] += eps * d[j];
                dn[j] -= eps * d[j];
            }
            double fd = (transport_cost(p0, MassTrace{grid, up}) -
                         transport_cost(p0, MassTrace{grid, dn})) /
                        (2.0 * eps);
            double denom = std::max({std::fabs(fd), std::fabs(directional), 1e-14});
            worst = std::max(worst, std::fabs(fd - directional) / denom);
        }
        rep.lines.push_back({"transport-gradient-fd", worst, 1e-4, worst < 1e-4});
    }

    EncodingConfig enc;
    enc.scheme = EncodingScheme::softplus;
    enc.beta = cfg.objective ? cfg.objective->beta : 2.0;
    enc.floor_ratio = cfg.objective ? cfg.objective->floor_ratio : 0.0;

    {  // encoding adjoint against finite differences of <phi, encode(u)>
        TimeGrid grid{128, 0.004, 0.0};
        size_t n = 128;
        double worst = 0.0;
        for (int64_t trial = 0; trial < spec.ot_dirs; ++trial) {
            Trace u{grid, Vec(n)}, d{grid, Vec(n)};
            GradTrace phi{grid, Vec(n)};
            for (size_t j = 0; j < n; ++j) {
                u.a[j] = rng.uniform(-1.0, 1.0);
                d.a[j] = rng.uniform(-1.0, 1.0);
                phi.a[j] = rng.uniform(-1.0, 1.0);
            }
            Trace adj = encode_adjoint(u, phi, enc);
            double directional = 0.0;
            for (size_t j = 0; j < n; ++j) directional += adj.a[j] * d.a[j];
            double eps = 1e-6;
            Trace up = u, dn = u;
            for (size_t j = 0; j < n; ++j) {
                up.a[j] += eps * d.a[j];
                dn.a[j] -= eps * d.a[j];
            }
            auto pair = [&](const Trace& t) {
                EncodedTrace e = encode(t, enc);
                double acc = 0.0;
                for (size_t j = 0; j < n; ++j) acc += phi.a[j] * e.pdf.mass[j];
                return acc;
            };
            double fd = (pair(up) - pair(dn)) / (2.0 * eps);
            double denom = std::max({std::fabs(fd), std::fabs(directional), 1e-14});
            worst = std::max(worst, std::fabs(fd - directional) / denom);
        }
        rep.lines.push_back({"encoding-adjoint-fd", worst, 1e-6, worst < 1e-6});
    }

    // the remaining checks need a wave experiment
    cfg.need_model("gradcheck");
    cfg.need_acquisition("gradcheck");
    SlownessModel truth = cfg.build_model();
    truth.validate();
    Acquisition acq = cfg.build_acquisition(truth);
    SimParams params = cfg.sim;
    if (params.pml_velocity == 0.0) params.pml_velocity = truth.c_max();

    {  // forward/adjoint transpose pairing on the configured geometry
        Acquisition racq = acq;
        int64_t n = acq.n_steps();
        TimeGrid wg{n, acq.dt_sim, 0.0};
        Vec w(static_cast<size_t>(n));
        for (auto& v : w) v = rng.normal();
        racq.wavelet = Trace{wg, w};
        auto fwd = simulate_forward(truth, racq, 0, params);
        ShotGather ghat;
        ghat.grid = racq.recording_grid();
        ghat.receivers = racq.receivers;
        ghat.traces.assign(racq.receivers.size(), Vec(static_cast<size_t>(ghat.grid.nt)));
        for (auto& tr : ghat.traces)
            for (auto& v : tr) v = rng.normal();
        auto adj = simulate_adjoint(truth, racq, 0, ghat, params);
        double lhs = 0.0, rhs = 0.0;
        for (size_t r = 0; r < ghat.traces.size(); ++r)
            for (size_t k = 0; k < ghat.traces[r].size(); ++k)
                lhs += ghat.traces[r][k] * fwd.gather.traces[r][k];
        for (size_t k = 0; k < w.size(); ++k) rhs += w[k] * adj.source_samples[k];
        double measured = std::fabs(lhs - rhs) / std::max(std::fabs(lhs), 1e-300);
        rep.lines.push_back({"adjoint-transpose", measured, 1e-8, measured < 1e-8});
    }

    // model-space gradients, probed against central differences cell by cell
    SlownessModel current =
        spec.smooth_sigma > 0.0 ? gaussian_smooth(truth, spec.smooth_sigma) : truth;
    std::vector<ShotGather> obs = detail::simulate_all_shots(truth, acq, params);

    std::vector<std::pair<int64_t, int64_t>> cells;
    for (const Pos& p : spec.cells)
        cells.push_back({static_cast<int64_t>(std::llround(p.x)),
                         static_cast<int64_t>(std::llround(p.z))});
    if (cells.empty()) {
        // quarter points of the straight path from the first source to the
        // last receiver: guaranteed to be insonified by the direct wave
        Pos s = acq.sources.front(), r = acq.receivers.back();
        for (double f : {0.25, 0.5, 0.75}) {
            int64_t ix = static_cast<int64_t>(std::llround((s.x + f * (r.x - s.x)) / truth.dx));
            int64_t iz = static_cast<int64_t>(std::llround((s.z + f * (r.z - s.z)) / truth.dz));
            cells.push_back({std::clamp<int64_t>(ix, 1, truth.nx - 2),
                             std::clamp<int64_t>(iz, 1, truth.nz - 2)});
        }
    }
    for (auto [ix, iz] : cells)
        require(ix >= 0 && ix < truth.nx && iz >= 0 && iz < truth.nz,
                "gradcheck: probe cell outside the model grid");

    std::vector<ObjectiveSpec> objectives(2);
    objectives[0].kind = MisfitKind::l2;
    objectives[1].kind = MisfitKind::w2;
    objectives[1].enc = enc;
    const char* names[] = {"model-gradient-fd-l2", "model-gradient-fd-w2"};
    for (size_t o = 0; o < 2; ++o) {
        GradientResult base = model_gradient(current, acq, obs, objectives[o], params);
        double worst = 0.0;
        for (auto [ix, iz] : cells) {
            double adj = base.gradient.at(ix, iz) * gradient_scale;
            double best = 1e300;
            for (double rel : {1e-3, 3e-4, 1e-4}) {
                double eps = rel * current.at(ix, iz);
                SlownessModel up = current, dn = current;
                up.at(ix, iz) += eps;
                dn.at(ix, iz) -= eps;
                double fd = (detail::total_misfit(detail::simulate_all_shots(up, acq, params), obs,
                                                  objectives[o]) -
                             detail::total_misfit(detail::simulate_all_shots(dn, acq, params), obs,
                                                  objectives[o])) /
                            (2.0 * eps);
                double denom = std::max({std::fabs(fd), std::fabs(adj), 1e-300});
                best = std::min(best, std::fabs(fd - adj) / denom);
            }
            worst = std::max(worst, best);
        }
        rep.lines.push_back({names[o], worst, 1e-2, worst < 1e-2});
    }
    return rep;
}

/// Runs the derivative battery, prints one line per check, writes the same
/// table as CSV, and fails with a numerical error if any check fails.
inline void cmd_gradcheck(const ExperimentConfig& cfg, std::ostream& log) {
    GradcheckReport rep = run_gradcheck(cfg);
    detail::ensure_dir(cfg.out_dir);
    std::string csv = "check,measured,tol,pass\n";
    for (const auto& l : rep.lines) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %-22s measured = %.3e  tol = %.1e\n",
                      l.pass ? "PASS" : "FAIL", l.name.c_str(), l.measured, l.tol);
        log << buf;
        csv += l.name + "," + detail::fmt(l.measured) + "," + detail::fmt(l.tol) + "," +
               (l.pass ? "1" : "0") + "\n";
    }
    detail::write_text_atomic(cfg.out_dir + "/gradcheck.csv", csv);
    if (!rep.all_pass()) throw numerical_error("gradcheck: at least one derivative check failed");
}

struct InversionRun {
    SlownessModel truth, initial, final_model;
    MinimizeResult result;
    double value_initial = 0.0;
};

/// Synthesizes data on the configured model, starts from a smoothed (or file)
/// initial guess, and runs the bound-constrained minimization.
inline InversionRun run_inversion(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.need_model("invert");
    cfg.need_acquisition("invert");
    const ObjSpec& obj = cfg.need_objective("invert");
    const OptSpec& opt = cfg.need_optimizer("invert");

    InversionRun run;
    run.truth = cfg.build_model();
    run.truth.validate();

    // pick the time step so every model inside the velocity box is stable,
    // and pin the absorbing profile so it cannot vary with the iterate
    SlownessModel vbound =
        homogeneous_model(run.truth.nx, run.truth.nz, run.truth.dx, run.truth.dz, opt.v_max);
    Acquisition acq = cfg.build_acquisition(vbound);
    SimParams params = cfg.sim;
    if (params.pml_velocity == 0.0) params.pml_velocity = opt.v_max;

    if (opt.initial == "file") {
        run.initial = read_model(cfg.resolve(opt.initial_path));
        require(run.initial.nx == run.truth.nx && run.initial.nz == run.truth.nz,
                "invert: initial model grid does not match the configured model");
    } else {
        run.initial = opt.smooth_sigma > 0.0 ? gaussian_smooth(run.truth, opt.smooth_sigma)
                                             : run.truth;
    }

    size_t n = run.truth.m.size();
    double lo_val = 1.0 / (opt.v_max * opt.v_max), hi_val = 1.0 / (opt.v_min * opt.v_min);
    for (auto& v : run.initial.m) v = std::clamp(v, lo_val, hi_val);

    log << "invert: " << acq.sources.size() << " shots, " << acq.receivers.size()
        << " receivers, objective = " << to_string(obj.kind) << ", dt = " << acq.dt_sim << " s, "
        << acq.n_steps() << " steps\n";
    std::vector<ShotGather> observed = detail::simulate_all_shots(run.truth, acq, params);

    ObjectiveSpec spec = obj.spec();
    int64_t evals = 0;
    Objective evaluate = [&](const Vec& x, Vec& grad) {
        SlownessModel m = run.truth;
        m.m = x;
        GradientResult r = model_gradient(m, acq, observed, spec, params);
        grad = r.gradient.v;
        if (opt.grad_smooth_x > 0.0) {
            // smooth the update along x so point sources and receivers cannot
            // imprint station statics on the shallow rows
            Vec sm(grad.size());
            detail::gaussian_smooth_axis(sm, grad, m.nz, m.nx, 1, m.nz, opt.grad_smooth_x);
            grad = std::move(sm);
        }
        ++evals;
        return r.value;
    };

    OptimizerConfig ocfg;
    ocfg.memory = static_cast<int>(opt.memory);
    ocfg.max_iters = opt.max_iters;
    ocfg.stop_tol = opt.stop_tol;
    ocfg.lo.assign(n, lo_val);
    ocfg.hi.assign(n, hi_val);

    run.result = minimize(run.initial.m, evaluate, ocfg);
    run.final_model = run.truth;
    run.final_model.m = run.result.x;
    run.value_initial = run.result.history.front().value;
    log << "invert: " << to_string(run.result.reason) << " after "
        << run.result.history.back().iter << " iterations, " << evals << " evaluations, value "
        << run.value_initial << " -> " << run.result.history.back().value << "\n";
    return run;
}

/// Inversion driver: writes the initial/final models, the per-iteration
/// history, the relative model error against the configured truth, and a
/// key = value summary.
inline void cmd_invert(const ExperimentConfig& cfg, std::ostream& log) {
    InversionRun run = run_inversion(cfg, log);
    detail::ensure_dir(cfg.out_dir);

    write_model(cfg.out_dir + "/model_initial.bin", run.initial);
    write_model(cfg.out_dir + "/model_final.bin", run.final_model);
    write_field(cfg.out_dir + "/reldiff.bin", relative_difference(run.final_model, run.truth));

    std::string csv = "iter,value,grad_norm,step\n";
    for (const auto& rec : run.result.history)
        csv += std::to_string(rec.iter) + "," + detail::fmt(rec.value) + "," +
               detail::fmt(rec.grad_norm) + "," + detail::fmt(rec.step) + "\n";
    detail::write_text_atomic(cfg.out_dir + "/history.csv", csv);

    double shallow = run.truth.depth() / 3.0;
    std::string summary;
    summary += "objective = " + std::string(to_string(cfg.need_objective("invert").kind)) + "\n";
    summary += "iterations = " + std::to_string(run.result.history.back().iter) + "\n";
    summary += "stop_reason = " + std::string(to_string(run.result.reason)) + "\n";
    summary += "value_initial = " + detail::fmt(run.value_initial) + "\n";
    summary += "value_final = " + detail::fmt(run.result.history.back().value) + "\n";
    summary += "rmse_initial = " + detail::fmt(velocity_rmse(run.initial, run.truth)) + "\n";
    summary += "rmse_final = " + detail::fmt(velocity_rmse(run.final_model, run.truth)) + "\n";
    summary += "rmse_shallow_initial = " +
               detail::fmt(velocity_rmse(run.initial, run.truth, 0.0, shallow)) + "\n";
    summary += "rmse_shallow_final = " +
               detail::fmt(velocity_rmse(run.final_model, run.truth, 0.0, shallow)) + "\n";
    detail::write_text_atomic(cfg.out_dir + "/summary.txt", summary);

    for (const char* f : {"model_initial.bin", "model_final.bin", "reldiff.bin", "history.csv",
                          "summary.txt"})
        log << "  wrote " << cfg.out_dir << "/" << f << "\n";
}

}  // namespace otfwi
