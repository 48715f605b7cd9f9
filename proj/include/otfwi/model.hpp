#pragma once

#include <algorithm>
#include <cmath>

#include "otfwi/core.hpp"

namespace otfwi {

/// Scalar field on the physical simulation grid, stored z-fastest.
struct Grid2D {
    int64_t nx = 0, nz = 0;
    double dx = 0.0, dz = 0.0;
    Vec v;

    double& at(int64_t ix, int64_t iz) { return v[static_cast<size_t>(ix * nz + iz)]; }
    double at(int64_t ix, int64_t iz) const { return v[static_cast<size_t>(ix * nz + iz)]; }

    void validate_shape() const {
        require(nx >= 2 && nz >= 2, "Grid2D: nx and nz must be >= 2");
        require(std::isfinite(dx) && dx > 0.0 && std::isfinite(dz) && dz > 0.0,
                "Grid2D: spacings must be positive");
        require(v.size() == static_cast<size_t>(nx * nz), "Grid2D: value size mismatch");
    }
};

using ModelGradient = Grid2D;

/// Squared slowness (1/c^2, s^2/m^2) per cell, z-fastest layout.
struct SlownessModel {
    int64_t nx = 0, nz = 0;
    double dx = 0.0, dz = 0.0;
    Vec m;

    double& at(int64_t ix, int64_t iz) { return m[static_cast<size_t>(ix * nz + iz)]; }
    double at(int64_t ix, int64_t iz) const { return m[static_cast<size_t>(ix * nz + iz)]; }

    double width() const { return static_cast<double>(nx - 1) * dx; }
    double depth() const { return static_cast<double>(nz - 1) * dz; }

    double c_min() const {
        double mmax = *std::max_element(m.begin(), m.end());
        return 1.0 / std::sqrt(mmax);
    }
    double c_max() const {
        double mmin = *std::min_element(m.begin(), m.end());
        return 1.0 / std::sqrt(mmin);
    }

    void validate(double v_lo = 1000.0, double v_hi = 6000.0) const {
        require(nx >= 2 && nz >= 2, "SlownessModel: nx and nz must be >= 2");
        require(std::isfinite(dx) && dx > 0.0 && std::isfinite(dz) && dz > 0.0,
                "SlownessModel: spacings must be positive");
        require(m.size() == static_cast<size_t>(nx * nz), "SlownessModel: cell count mismatch");
        double lo = 1.0 / (v_hi * v_hi), hi = 1.0 / (v_lo * v_lo);
        for (double x : m)
            require(std::isfinite(x) && x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12),
                    "SlownessModel: squared slowness outside configured velocity bounds");
    }
};

inline SlownessModel homogeneous_model(int64_t nx, int64_t nz, double dx, double dz, double c) {
    require(c > 0.0, "homogeneous_model: velocity must be positive");
    SlownessModel mdl{nx, nz, dx, dz, Vec(static_cast<size_t>(nx * nz), 1.0 / (c * c))};
    return mdl;
}

/// Two homogeneous layers split at depth interface_z (meters).
inline SlownessModel two_layer_model(int64_t nx, int64_t nz, double dx, double dz, double c_top,
                                     double c_bottom, double interface_z) {
    require(c_top > 0.0 && c_bottom > 0.0, "two_layer_model: velocities must be positive");
    SlownessModel mdl{nx, nz, dx, dz, Vec(static_cast<size_t>(nx * nz))};
    for (int64_t ix = 0; ix < nx; ++ix)
        for (int64_t iz = 0; iz < nz; ++iz) {
            double c = static_cast<double>(iz) * dz < interface_z ? c_top : c_bottom;
            mdl.at(ix, iz) = 1.0 / (c * c);
        }
    return mdl;
}

/// Horizontally layered model: cell velocity is that of the deepest layer
/// whose top depth is <= z. tops must start at 0 and increase.
inline SlownessModel layered_model(int64_t nx, int64_t nz, double dx, double dz,
                                   const Vec& tops, const Vec& velocities) {
    require(!tops.empty() && tops.size() == velocities.size(),
            "layered_model: need matching layer tops and velocities");
    require(tops[0] == 0.0, "layered_model: first layer top must be 0");
    for (size_t i = 1; i < tops.size(); ++i)
        require(tops[i] > tops[i - 1], "layered_model: layer tops must increase");
    SlownessModel mdl{nx, nz, dx, dz, Vec(static_cast<size_t>(nx * nz))};
    for (int64_t iz = 0; iz < nz; ++iz) {
        double z = static_cast<double>(iz) * dz;
        size_t layer = 0;
        while (layer + 1 < tops.size() && tops[layer + 1] <= z) ++layer;
        double c = velocities[layer];
        require(c > 0.0, "layered_model: velocities must be positive");
        for (int64_t ix = 0; ix < nx; ++ix) mdl.at(ix, iz) = 1.0 / (c * c);
    }
    return mdl;
}

/// Water layer over a linear velocity gradient:
/// c(z) = water_c for z < water_depth, v0 + alpha z below.
inline SlownessModel linear_gradient_model(int64_t nx, int64_t nz, double dx, double dz, double v0,
                                           double alpha, double water_depth = 50.0,
                                           double water_c = 1500.0) {
    SlownessModel mdl{nx, nz, dx, dz, Vec(static_cast<size_t>(nx * nz))};
    for (int64_t iz = 0; iz < nz; ++iz) {
        double z = static_cast<double>(iz) * dz;
        double c = z < water_depth ? water_c : v0 + alpha * z;
        require(c > 0.0, "linear_gradient_model: nonpositive velocity in profile");
        for (int64_t ix = 0; ix < nx; ++ix) mdl.at(ix, iz) = 1.0 / (c * c);
    }
    return mdl;
}

namespace detail {

/// Truncated Gaussian kernel, renormalized at the edges.
inline void gaussian_smooth_axis(Vec& dst, const Vec& src, int64_t n_outer, int64_t n_inner,
                                 int64_t stride_outer, int64_t stride_inner, double sigma) {
    int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
    Vec kern(static_cast<size_t>(2 * radius + 1));
    for (int64_t k = -radius; k <= radius; ++k)
        kern[static_cast<size_t>(k + radius)] =
            std::exp(-0.5 * (static_cast<double>(k) / sigma) * (static_cast<double>(k) / sigma));
    for (int64_t o = 0; o < n_outer; ++o)
        for (int64_t i = 0; i < n_inner; ++i) {
            double acc = 0.0, wsum = 0.0;
            for (int64_t k = -radius; k <= radius; ++k) {
                int64_t j = i + k;
                if (j < 0 || j >= n_inner) continue;
                double w = kern[static_cast<size_t>(k + radius)];
                acc += w * src[static_cast<size_t>(o * stride_outer + j * stride_inner)];
                wsum += w;
            }
            dst[static_cast<size_t>(o * stride_outer + i * stride_inner)] = acc / wsum;
        }
}

}  // namespace detail

/// Separable Gaussian smoothing of the squared slowness, sigma in grid cells.
inline SlownessModel gaussian_smooth(const SlownessModel& in, double sigma_cells) {
    require(std::isfinite(sigma_cells) && sigma_cells > 0.0,
            "gaussian_smooth: sigma must be positive");
    SlownessModel out = in;
    Vec tmp(in.m.size());
    detail::gaussian_smooth_axis(tmp, in.m, in.nx, in.nz, in.nz, 1, sigma_cells);   // along z
    detail::gaussian_smooth_axis(out.m, tmp, in.nz, in.nx, 1, in.nz, sigma_cells);  // along x
    return out;
}

/// Root-mean-square difference of squared slowness over a depth window
/// [z_lo, z_hi) in meters; the full-model overload spans everything.
inline double model_rmse(const SlownessModel& a, const SlownessModel& b, double z_lo, double z_hi) {
    require(a.nx == b.nx && a.nz == b.nz, "model_rmse: shape mismatch");
    KahanSum s;
    int64_t count = 0;
    for (int64_t iz = 0; iz < a.nz; ++iz) {
        double z = static_cast<double>(iz) * a.dz;
        if (z < z_lo || z >= z_hi) continue;
        for (int64_t ix = 0; ix < a.nx; ++ix) {
            double d = a.at(ix, iz) - b.at(ix, iz);
            s.add(d * d);
            ++count;
        }
    }
    require(count > 0, "model_rmse: empty depth window");
    return std::sqrt(s.value() / static_cast<double>(count));
}

inline double model_rmse(const SlownessModel& a, const SlownessModel& b) {
    return model_rmse(a, b, -1.0, 1e300);
}

/// Root-mean-square velocity error (m/s) over cells with z in [z_lo, z_hi).
inline double velocity_rmse(const SlownessModel& a, const SlownessModel& b, double z_lo, double z_hi) {
    require(a.nx == b.nx && a.nz == b.nz, "velocity_rmse: shape mismatch");
    KahanSum s;
    int64_t count = 0;
    for (int64_t iz = 0; iz < a.nz; ++iz) {
        double z = static_cast<double>(iz) * a.dz;
        if (z < z_lo || z >= z_hi) continue;
        for (int64_t ix = 0; ix < a.nx; ++ix) {
            double d = 1.0 / std::sqrt(a.at(ix, iz)) - 1.0 / std::sqrt(b.at(ix, iz));
            s.add(d * d);
            ++count;
        }
    }
    require(count > 0, "velocity_rmse: empty depth range");
    return std::sqrt(s.value() / static_cast<double>(count));
}

inline double velocity_rmse(const SlownessModel& a, const SlownessModel& b) {
    return velocity_rmse(a, b, -1.0, 1e300);
}

/// Per-cell relative difference (m - m_ref)/m_ref.
inline Grid2D relative_difference(const SlownessModel& m, const SlownessModel& ref) {
    require(m.nx == ref.nx && m.nz == ref.nz, "relative_difference: shape mismatch");
    Grid2D g{m.nx, m.nz, m.dx, m.dz, Vec(m.m.size())};
    for (size_t i = 0; i < m.m.size(); ++i) g.v[i] = (m.m[i] - ref.m[i]) / ref.m[i];
    return g;
}

}  // namespace otfwi
