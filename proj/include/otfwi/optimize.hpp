#pragma once

#include <deque>
#include <functional>

#include "otfwi/core.hpp"

namespace otfwi {

/// Bound-constrained limited-memory quasi-Newton settings.
struct OptimizerConfig {
    int memory = 10;
    Vec lo, hi;  ///< per-cell bounds; must match the unknown's size
    int64_t max_iters = 100;
    double stop_tol = 1e-5;       ///< relative-decrease threshold
    double armijo_c1 = 1e-4;      ///< sufficient-decrease constant
    double backtrack = 0.5;       ///< step shrink factor
    int max_backtracks = 20;

    void validate(size_t n) const {
        require(memory >= 1, "OptimizerConfig: memory must be >= 1");
        require(lo.size() == n && hi.size() == n, "OptimizerConfig: bounds must match unknown size");
        for (size_t i = 0; i < n; ++i)
            require(lo[i] < hi[i], "OptimizerConfig: lower bound must be < upper bound");
        require(max_iters >= 1, "OptimizerConfig: max_iters must be >= 1");
        require(stop_tol > 0.0, "OptimizerConfig: stop_tol must be > 0");
        require(armijo_c1 > 0.0 && armijo_c1 < 1.0, "OptimizerConfig: armijo constant in (0,1)");
        require(backtrack > 0.0 && backtrack < 1.0, "OptimizerConfig: backtrack factor in (0,1)");
        require(max_backtracks >= 1, "OptimizerConfig: max_backtracks must be >= 1");
    }
};

struct IterationRecord {
    int64_t iter = 0;
    double value = 0.0;
    double grad_norm = 0.0;  ///< max-abs gradient component
    double step = 0.0;
};

enum class StopReason { tolerance, max_iters, line_search_failure };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::tolerance: return "relative-decrease tolerance";
        case StopReason::max_iters: return "iteration limit";
        default: return "line-search failure";
    }
}

struct MinimizeResult {
    Vec x;
    std::vector<IterationRecord> history;
    StopReason reason = StopReason::max_iters;
};

/// evaluate(x, grad) returns the objective and fills grad (same size as x).
using Objective = std::function<double(const Vec&, Vec&)>;

namespace detail {

inline double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline void project_box(Vec& x, const Vec& lo, const Vec& hi) {
    for (size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

}  // namespace detail

/// Projected L-BFGS with backtracking Armijo line search. Stops when the
/// relative decrease (J_k - J_{k+1}) / max(J_k, J_{k+1}, 1) falls below
/// stop_tol, on the iteration limit, or when no descent step is found.
inline MinimizeResult minimize(const Vec& initial, const Objective& evaluate,
                               const OptimizerConfig& cfg) {
    const size_t n = initial.size();
    cfg.validate(n);
    for (size_t i = 0; i < n; ++i)
        require(initial[i] >= cfg.lo[i] && initial[i] <= cfg.hi[i],
                "minimize: initial point violates bounds");

    MinimizeResult res;
    res.x = initial;
    Vec g(n), g_new(n);
    double f = evaluate(res.x, g);
    if (!std::isfinite(f) || !all_finite(g))
        throw numerical_error("minimize: non-finite objective or gradient at the initial point");
    res.history.push_back({0, f, detail::inf_norm(g), 0.0});

    double span = 0.0;
    for (size_t i = 0; i < n; ++i) span = std::max(span, cfg.hi[i] - cfg.lo[i]);
    // without curvature information, displace by a few percent of the
    // variable scale rather than trusting the gradient's own units
    auto scaled_first_step = [&](const Vec& d) {
        double xn = detail::inf_norm(res.x);
        double base = xn > 0.0 ? std::min(xn, span) : span;
        return 0.05 * base / std::max(detail::inf_norm(d), 1e-300);
    };

    std::deque<Vec> S, Y;
    std::deque<double> rho;

    for (int64_t it = 1; it <= cfg.max_iters; ++it) {
        // two-loop recursion for d = -H g
        Vec d = g;
        std::vector<double> alpha(S.size());
        for (size_t j = S.size(); j-- > 0;) {
            alpha[j] = rho[j] * kdot(S[j], d);
            for (size_t i = 0; i < n; ++i) d[i] -= alpha[j] * Y[j][i];
        }
        if (!S.empty()) {
            double gamma = 1.0 / (rho.back() * kdot(Y.back(), Y.back()));
            for (auto& v : d) v *= gamma;
        }
        for (size_t j = 0; j < S.size(); ++j) {
            double beta = rho[j] * kdot(Y[j], d);
            for (size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * S[j][i];
        }
        for (auto& v : d) v = -v;

        double t0 = S.empty() ? scaled_first_step(d) : 1.0;

        bool accepted = false;
        Vec x_new(n);
        double f_new = 0.0, t_used = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {  // steepest-descent fallback
                d = g;
                for (auto& v : d) v = -v;
                t0 = scaled_first_step(d);
            }
            double t = t0;
            for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.backtrack) {
                x_new = res.x;
                for (size_t i = 0; i < n; ++i) x_new[i] += t * d[i];
                detail::project_box(x_new, cfg.lo, cfg.hi);
                double dir = 0.0;
                for (size_t i = 0; i < n; ++i) dir += g[i] * (x_new[i] - res.x[i]);
                if (dir >= 0.0) continue;  // projection turned it non-descent
                f_new = evaluate(x_new, g_new);
                if (!std::isfinite(f_new) || !all_finite(g_new))
                    throw numerical_error("minimize: non-finite objective or gradient during line search");
                if (f_new <= f + cfg.armijo_c1 * dir) {
                    accepted = true;
                    t_used = t;
                    break;
                }
            }
        }
        if (!accepted) {
            res.reason = StopReason::line_search_failure;
            return res;
        }

        Vec s(n), y(n);
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - res.x[i];
            y[i] = g_new[i] - g[i];
            sy += s[i] * y[i];
            ss += s[i] * s[i];
            yy += y[i] * y[i];
        }
        if (sy > 1e-10 * std::sqrt(ss * yy)) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > cfg.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }

        double f_prev = f;
        res.x = x_new;
        f = f_new;
        g = g_new;
        res.history.push_back({it, f, detail::inf_norm(g), t_used});

        if ((f_prev - f) / std::max({f_prev, f, 1.0}) < cfg.stop_tol) {
            res.reason = StopReason::tolerance;
            return res;
        }
    }
    res.reason = StopReason::max_iters;
    return res;
}

}  // namespace otfwi
