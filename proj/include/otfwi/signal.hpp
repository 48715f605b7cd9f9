#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "otfwi/types.hpp"

namespace otfwi {

/// Ricker wavelet (1 - 2 pi^2 f^2 tau^2) exp(-pi^2 f^2 tau^2), tau = t - delay.
inline Trace ricker(double f_peak, const TimeGrid& grid, double delay) {
    require(std::isfinite(f_peak) && f_peak > 0.0, "ricker: peak frequency must be > 0");
    grid.validate();
    Trace out;
    out.grid = grid;
    out.a.resize(static_cast<size_t>(grid.nt));
    for (int64_t k = 0; k < grid.nt; ++k) {
        double tau = grid.node(k) - delay;
        double q = M_PI * M_PI * f_peak * f_peak * tau * tau;
        out.a[static_cast<size_t>(k)] = (1.0 - 2.0 * q) * std::exp(-q);
    }
    return out;
}

namespace detail {

/// In-place iterative radix-2 FFT; inverse scales by 1/n.
inline void fft_pow2(std::vector<std::complex<double>>& x, bool inverse) {
    const size_t n = x.size();
    require(n > 0 && (n & (n - 1)) == 0, "fft: length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto even = x[i + k];
                auto odd = x[i + k + len / 2] * w;
                x[i + k] = even + odd;
                x[i + k + len / 2] = even - odd;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : x) v /= static_cast<double>(n);
}

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Cosine-taper transfer function: 0 outside [lo, hi], 1 inside
/// [lo*1.25, hi/1.25], half-cosine ramps between.
inline double band_taper(double f, double lo, double hi) {
    double lo_full = lo * 1.25, hi_full = hi / 1.25;
    if (f < lo || f > hi) return 0.0;
    if (f >= lo_full && f <= hi_full) return 1.0;
    if (f < lo_full) return 0.5 * (1.0 - std::cos(M_PI * (f - lo) / (lo_full - lo)));
    return 0.5 * (1.0 + std::cos(M_PI * (f - hi_full) / (hi - hi_full)));
}

}  // namespace detail

/// Zero-phase frequency-domain band-pass with cosine rolloff; DC is removed.
inline Trace bandpass(const Trace& tr, double lo, double hi) {
    tr.grid.validate();
    require(all_finite(tr.a), "bandpass: non-finite input sample");
    double nyquist = 0.5 / tr.grid.dt;
    require(std::isfinite(lo) && std::isfinite(hi) && 0.0 < lo && lo < hi && hi < nyquist,
            "bandpass: band must satisfy 0 < lo < hi < Nyquist");
    const size_t nt = tr.a.size();
    const size_t np = detail::next_pow2(std::max<size_t>(nt, 8));
    std::vector<std::complex<double>> buf(np, {0.0, 0.0});
    for (size_t k = 0; k < nt; ++k) buf[k] = tr.a[k];
    detail::fft_pow2(buf, false);
    double df = 1.0 / (static_cast<double>(np) * tr.grid.dt);
    buf[0] = 0.0;
    for (size_t k = 1; k <= np / 2; ++k) {
        double h = detail::band_taper(static_cast<double>(k) * df, lo, hi);
        buf[k] *= h;
        if (k != np / 2) buf[np - k] *= h;
    }
    detail::fft_pow2(buf, true);
    Trace out;
    out.grid = tr.grid;
    out.a.resize(nt);
    for (size_t k = 0; k < nt; ++k) out.a[k] = buf[k].real();
    return out;
}

}  // namespace otfwi
