#pragma once

#include <algorithm>
#include <cmath>

#include "types.hpp"

namespace otfwi {

/// Running sum of the point masses.
inline CdfTrace cdf(const MassTrace& p) {
    p.validate();
    CdfTrace f;
    f.grid = p.grid;
    f.cum.resize(p.mass.size());
    double s = 0.0;
    for (size_t k = 0; k < p.mass.size(); ++k) {
        s += p.mass[k];
        f.cum[k] = s;
    }
    return f;
}

/**
 * phi(t_k) = f0^[-1](f1(t_k)) by a single two-pointer sweep with linear
 * interpolation between the bracketing nodes of f0. Degenerate brackets
 * (flat cdf segment) resolve to the left endpoint, matching the inf
 * convention of the pseudo-inverse. Levels are clamped to [0,1] so
 * floating-point slack above 1 cannot trigger out-of-range reads.
 */
inline TransportPlanTrace pseudo_inverse_compose(const CdfTrace& f0, const CdfTrace& f1) {
    require_same_grid(f0.grid, f1.grid, "pseudo_inverse_compose");
    const size_t n = f0.cum.size();
    TransportPlanTrace plan;
    plan.grid = f0.grid;
    plan.map.resize(n);
    size_t m = 0;
    for (size_t k = 0; k < n; ++k) {
        double ft = std::min(std::max(f1.cum[k], 0.0), 1.0);
        while (m < n - 1 && f0.cum[m] < ft) ++m;
        if (m == 0) {
            plan.map[k] = f0.grid.node(0);
        } else if (m == n - 1 && f0.cum[m] < ft) {
            plan.map[k] = f0.grid.node(static_cast<int64_t>(m));
        } else {
            double den = f0.cum[m] - f0.cum[m - 1];
            if (den <= 0.0) {
                plan.map[k] = f0.grid.node(static_cast<int64_t>(m) - 1);
            } else {
                double alpha = (ft - f0.cum[m - 1]) / den;
                plan.map[k] = f0.grid.node(static_cast<int64_t>(m) - 1) + alpha * f0.grid.dt;
            }
        }
        plan.map[k] = std::min(std::max(plan.map[k], f0.grid.t0), f0.grid.t_end());
    }
    return plan;
}

namespace detail {

/// Exact quantile-level integral sum_levels w * |t_i - t_j|^e between two
/// discrete point-mass measures: both pseudo-inverses are step functions, so
/// merging their cdf levels integrates (f0^[-1](s) - f1^[-1](s)) exactly.
inline double quantile_merge_cost(const TimeGrid& g, const Vec& f0, const Vec& f1, int exponent) {
    const size_t n = f0.size();
    double cost = 0.0, prev = 0.0;
    size_t i = 0, j = 0;
    while (i < n && j < n) {
        double lo = std::min(f0[i], f1[j]);
        double w = lo - prev;
        if (w > 0.0) {
            double d = std::fabs(g.node(static_cast<int64_t>(i)) - g.node(static_cast<int64_t>(j)));
            cost += w * (exponent == 1 ? d : d * d);
        }
        prev = lo;
        if (f0[i] <= lo) ++i;
        if (f1[j] <= lo) ++j;
    }
    return cost;
}

}  // namespace detail

/**
 * Quadratic transport cost T(p0, p1) = integral over quantile levels of
 * (f0^[-1](s) - f1^[-1](s))^2 ds, evaluated exactly for point masses by
 * merging the two cdf level sets. Exact symmetry and exact agreement with
 * the monotone-coupling optimum follow by construction. Units: seconds^2.
 */
inline double transport_cost(const MassTrace& p0, const MassTrace& p1) {
    require_same_grid(p0.grid, p1.grid, "transport_cost");
    p0.validate();
    p1.validate();
    Vec f0(p0.mass.size()), f1(p1.mass.size());
    double s0 = 0.0, s1 = 0.0;
    for (size_t k = 0; k < p0.mass.size(); ++k) {
        s0 += p0.mass[k];
        f0[k] = s0;
        s1 += p1.mass[k];
        f1[k] = s1;
    }
    return detail::quantile_merge_cost(p0.grid, f0, f1, 2);
}

/**
 * First variation zeta of transport_cost with respect to p1, defined up to an
 * additive constant. zeta_k = sum_{j>=k} D_j where D_j is the exact change
 * rate of the quantile integral when level f1(t_j) moves. Where a level of f1
 * coincides with a level of f0 the pseudo-inverse jumps; the two one-sided
 * values are averaged, which both matches central finite differences and
 * makes zeta vanish identically at p0 == p1.
 */
inline GradTrace transport_gradient(const MassTrace& p0, const MassTrace& p1) {
    require_same_grid(p0.grid, p1.grid, "transport_gradient");
    p0.validate();
    p1.validate();
    const size_t n = p0.mass.size();
    for (size_t k = 0; k < n; ++k) {
        if (!(p0.mass[k] > 0.0) || !(p1.mass[k] > 0.0))
            throw validation_error(
                "transport_gradient: zero mass at node " + std::to_string(k) +
                " (strictly positive masses required; encode with a positive floor)");
    }
    Vec f0(n), f1(n);
    double s0 = 0.0, s1 = 0.0;
    for (size_t k = 0; k < n; ++k) {
        s0 += p0.mass[k];
        f0[k] = s0;
        s1 += p1.mass[k];
        f1[k] = s1;
    }
    const TimeGrid& g = p0.grid;
    GradTrace zeta{g, Vec(n, 0.0)};
    // D_j for j = 0..n-2, then suffix sums.
    Vec D(n > 0 ? n - 1 : 0, 0.0);
    size_t mp = 0, mm = 0;  // min{i: f0_i > s}, min{i: f0_i >= s}, both capped at n-1
    for (size_t j = 0; j + 1 < n; ++j) {
        double s = f1[j];
        while (mp < n - 1 && f0[mp] <= s) ++mp;
        while (mm < n - 1 && f0[mm] < s) ++mm;
        double xp = g.node(static_cast<int64_t>(mp));
        double xm = g.node(static_cast<int64_t>(mm));
        double tj = g.node(static_cast<int64_t>(j));
        double tj1 = g.node(static_cast<int64_t>(j) + 1);
        D[j] = 0.5 * ((xp - tj) * (xp - tj) - (xp - tj1) * (xp - tj1) +
                      (xm - tj) * (xm - tj) - (xm - tj1) * (xm - tj1));
    }
    double suffix = 0.0;
    for (size_t j = n - 1; j-- > 0;) {
        suffix += D[j];
        zeta.a[j] = suffix;
    }
    return zeta;
}

/// W1(p0, p1) = sum_k |f0(t_k) - f1(t_k)| * dt. Units: seconds.
inline double w1_distance(const MassTrace& p0, const MassTrace& p1) {
    require_same_grid(p0.grid, p1.grid, "w1_distance");
    p0.validate();
    p1.validate();
    double s0 = 0.0, s1 = 0.0, w = 0.0;
    for (size_t k = 0; k < p0.mass.size(); ++k) {
        s0 += p0.mass[k];
        s1 += p1.mass[k];
        w += std::fabs(s0 - s1);
    }
    return w * p0.grid.dt;
}

namespace detail {

/// Piecewise-linear pseudo-inverse of a cdf, evaluated on an ascending
/// sequence of levels via a resumable cursor. Flat segments resolve left.
struct LinearInverse {
    const TimeGrid* g;
    const Vec* cum;
    size_t m = 0;

    double eval(double s) {
        const Vec& f = *cum;
        const size_t n = f.size();
        s = std::min(std::max(s, 0.0), 1.0);
        while (m < n - 1 && f[m] < s) ++m;
        if (m == 0) return g->node(0);
        if (m == n - 1 && f[m] < s) return g->node(static_cast<int64_t>(m));
        double den = f[m] - f[m - 1];
        if (den <= 0.0) return g->node(static_cast<int64_t>(m) - 1);
        double alpha = (s - f[m - 1]) / den;
        return g->node(static_cast<int64_t>(m) - 1) + alpha * g->dt;
    }
};

}  // namespace detail

/**
 * W2 displacement interpolation (McCann): the measure whose pseudo-inverse is
 * (1-alpha)*f0^[-1] + alpha*f1^[-1], re-binned onto the grid as point masses.
 * The blended inverse is piecewise linear with breakpoints at the merged cdf
 * levels, so the re-binning g(t_k) = sup{s : blend(s) <= t_k} is computed
 * exactly by walking those pieces; endpoints reproduce the inputs exactly up
 * to rounding.
 */
inline MassTrace displacement_interpolation(const MassTrace& p0, const MassTrace& p1,
                                            double alpha) {
    require_same_grid(p0.grid, p1.grid, "displacement_interpolation");
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
            "displacement_interpolation: alpha must lie in [0,1]");
    p0.validate();
    p1.validate();
    const size_t n = p0.mass.size();
    const TimeGrid& g = p0.grid;

    Vec f0(n), f1(n);
    double s0 = 0.0, s1 = 0.0;
    for (size_t k = 0; k < n; ++k) {
        s0 += p0.mass[k];
        f0[k] = std::min(s0, 1.0);
        s1 += p1.mass[k];
        f1[k] = std::min(s1, 1.0);
    }

    // Breakpoint levels: 0, all f0/f1 levels, 1.
    Vec levels;
    levels.reserve(2 * n + 2);
    levels.push_back(0.0);
    std::merge(f0.begin(), f0.end(), f1.begin(), f1.end(), std::back_inserter(levels));
    levels.push_back(1.0);
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    detail::LinearInverse inv0{&g, &f0, 0}, inv1{&g, &f1, 0};
    Vec X(levels.size());
    for (size_t i = 0; i < levels.size(); ++i)
        X[i] = (1.0 - alpha) * inv0.eval(levels[i]) + alpha * inv1.eval(levels[i]);

    // g_k = sup{s : X(s) <= t_k}, walked with a shared cursor since both the
    // pieces and the grid nodes are ascending.
    MassTrace out;
    out.grid = g;
    out.mass.assign(n, 0.0);
    Vec gk(n);
    size_t piece = 0;  // current piece is [levels[piece], levels[piece+1]]
    for (size_t k = 0; k < n; ++k) {
        double tk = g.node(static_cast<int64_t>(k));
        while (piece + 1 < levels.size() && X[piece + 1] <= tk) ++piece;
        if (X[piece] > tk) {
            gk[k] = 0.0;  // blend exceeds t_k from the start
        } else if (piece + 1 == levels.size()) {
            gk[k] = 1.0;
        } else {
            double dx = X[piece + 1] - X[piece];
            if (dx <= 0.0)
                gk[k] = levels[piece + 1];
            else
                gk[k] = levels[piece] +
                        (tk - X[piece]) * (levels[piece + 1] - levels[piece]) / dx;
            gk[k] = std::min(gk[k], 1.0);
        }
        if (k > 0) gk[k] = std::max(gk[k], gk[k - 1]);
    }
    double prev = 0.0;
    for (size_t k = 0; k < n; ++k) {
        out.mass[k] = gk[k] - prev;
        prev = gk[k];
    }
    out.mass[n - 1] += 1.0 - gk[n - 1];
    return out;
}

/**
 * Reference transport cost by greedy monotone matching of atom lists (the
 * optimal coupling in 1D pairs quantiles in order). exponent selects |x-y|
 * or |x-y|^2. Intended as a small-size oracle; capped at nt <= 64.
 */
inline double lp_oracle_cost(const MassTrace& p0, const MassTrace& p1, int exponent = 2) {
    require_same_grid(p0.grid, p1.grid, "lp_oracle_cost");
    require(exponent == 1 || exponent == 2, "lp_oracle_cost: exponent must be 1 or 2");
    require(p0.grid.nt <= 64, "lp_oracle_cost: nt cap (64) exceeded");
    p0.validate();
    p1.validate();
    const size_t n = p0.mass.size();
    const TimeGrid& g = p0.grid;
    double cost = 0.0;
    size_t i = 0, j = 0;
    double r0 = p0.mass[0], r1 = p1.mass[0];
    while (i < n && j < n) {
        double m = std::min(r0, r1);
        if (m > 0.0) {
            double d = std::fabs(g.node(static_cast<int64_t>(i)) - g.node(static_cast<int64_t>(j)));
            cost += m * (exponent == 1 ? d : d * d);
        }
        r0 -= m;
        r1 -= m;
        if (r0 <= 0.0) {
            ++i;
            r0 = i < n ? p0.mass[i] : 0.0;
        }
        if (r1 <= 0.0) {
            ++j;
            r1 = j < n ? p1.mass[j] : 0.0;
        }
    }
    return cost;
}

}  // namespace otfwi
