#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace otfwi {

using Vec = std::vector<double>;

/// Invalid input or configuration; maps to CLI exit code 1.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown (NaN mid-run, divergence); maps to CLI exit code 2.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

/// Compensated accumulator; keeps long reductions accurate enough for the
/// constant-annihilation invariants tested at 1e-12 relative.
struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

inline double ksum(const Vec& v) {
    KahanSum k;
    for (double x : v) k.add(x);
    return k.value();
}

inline double kmean(const Vec& v) {
    return v.empty() ? 0.0 : ksum(v) / static_cast<double>(v.size());
}

inline double kdot(const Vec& a, const Vec& b) {
    KahanSum k;
    for (size_t i = 0; i < a.size(); ++i) k.add(a[i] * b[i]);
    return k.value();
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Deterministic, platform-independent RNG (splitmix64 core). std::
/// distributions are not reproducible across standard libraries, so the
/// experiment drivers use this instead.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// uniform in [0,1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
        return lo + static_cast<int64_t>(next() % static_cast<uint64_t>(hi - lo + 1));
    }
    double normal() {
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }
};

}  // namespace otfwi
