#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "core.hpp"

namespace otfwi {

/// Uniform time axis t_k = t0 + k*dt.
struct TimeGrid {
    int64_t nt = 0;
    double dt = 0.0;  // seconds
    double t0 = 0.0;  // seconds

    double node(int64_t k) const { return t0 + static_cast<double>(k) * dt; }
    double t_end() const { return node(nt - 1); }

    void validate() const {
        require(nt >= 2, "TimeGrid: nt must be >= 2, got " + std::to_string(nt));
        require(std::isfinite(dt) && dt > 0.0, "TimeGrid: dt must be > 0");
        require(std::isfinite(t0), "TimeGrid: t0 must be finite");
    }
    bool same_as(const TimeGrid& o) const {
        return nt == o.nt && dt == o.dt && t0 == o.t0;
    }
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* where) {
    if (!a.same_as(b))
        throw validation_error(std::string(where) + ": time grid mismatch (nt " +
                               std::to_string(a.nt) + " vs " + std::to_string(b.nt) + ")");
}

/// Time-sampled signal, possibly signed (seismic trace, wavelet, adjoint source).
struct Trace {
    TimeGrid grid;
    Vec a;

    Trace() = default;
    Trace(TimeGrid g, Vec v) : grid(g), a(std::move(v)) {}
    explicit Trace(TimeGrid g) : grid(g), a(static_cast<size_t>(g.nt), 0.0) {}
};

/// Nonnegative point masses p(t_k) on a time grid, normalized to total 1.
struct MassTrace {
    TimeGrid grid;
    Vec mass;

    MassTrace() = default;
    MassTrace(TimeGrid g, Vec m) : grid(g), mass(std::move(m)) {}

    void validate(double tol = 1e-12) const {
        grid.validate();
        require(static_cast<int64_t>(mass.size()) == grid.nt,
                "MassTrace: mass size does not match grid nt");
        KahanSum s;
        for (size_t k = 0; k < mass.size(); ++k) {
            if (!(mass[k] >= 0.0)) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "MassTrace: negative mass %.17g at node %zu",
                              mass[k], k);
                throw validation_error(buf);
            }
            s.add(mass[k]);
        }
        double total = s.value();
        if (std::fabs(total - 1.0) > tol) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "MassTrace: total mass %.17g not 1 within %g",
                          total, tol);
            throw validation_error(buf);
        }
    }
};

/// Running sums f(t_k) of a MassTrace.
struct CdfTrace {
    TimeGrid grid;
    Vec cum;
};

/// Monotone map values phi(t_k) = f0^[-1](f1(t_k)), in seconds.
struct TransportPlanTrace {
    TimeGrid grid;
    Vec map;
};

/// Per-node first variation of the transport cost (seconds^2), defined up to
/// an additive constant.
using GradTrace = Trace;

}  // namespace otfwi
