#pragma once

#include <cstdio>

#include "otfwi/model.hpp"
#include "otfwi/types.hpp"

namespace otfwi {

struct Pos {
    double x = 0.0, z = 0.0;
};

enum class BoundaryMode { absorbing, periodic };

struct SimParams {
    int64_t npml = 40;          ///< absorbing-layer width, cells
    double cfl_safety = 0.9;    ///< fraction of the validator CFL bound
    double pml_reflect = 1e-4;  ///< target boundary reflection coefficient
    double pml_velocity = 0.0;  ///< damping reference speed; 0 = the model's c_max.
                                ///< Pin it when the model varies (inversion, derivative
                                ///< checks) so the damping profile stays fixed.
    int64_t snapshot_stride = 1;
    BoundaryMode boundary = BoundaryMode::absorbing;

    void validate() const {
        require(npml >= 4 && npml <= 200, "SimParams: npml must lie in [4, 200]");
        require(cfl_safety > 0.0 && cfl_safety <= 1.0, "SimParams: cfl_safety must lie in (0, 1]");
        require(pml_reflect > 0.0 && pml_reflect < 1.0, "SimParams: pml_reflect must lie in (0, 1)");
        require(pml_velocity == 0.0 || (std::isfinite(pml_velocity) && pml_velocity > 0.0),
                "SimParams: pml_velocity must be 0 (auto) or positive");
        require(snapshot_stride >= 1, "SimParams: snapshot_stride must be >= 1");
    }
};

/// Validator bound on the time step.
inline double cfl_limit(const SlownessModel& model, double cfl_safety = 0.9) {
    return cfl_safety * std::min(model.dx, model.dz) / (std::sqrt(2.0) * model.c_max());
}

/// Largest stable step of the 4th-order-in-space leapfrog scheme.
inline double stability_limit(const SlownessModel& model) {
    double s = std::sqrt(1.0 / (model.dx * model.dx) + 1.0 / (model.dz * model.dz));
    return 0.5 * std::sqrt(3.0) / (model.c_max() * s);
}

/// Step that divides record_t into an integer number of steps while staying
/// below both the stability and validator bounds.
inline double choose_dt(const SlownessModel& model, double record_t, double cfl_safety = 0.9) {
    double cap = 0.8 * std::min(stability_limit(model), cfl_limit(model, cfl_safety));
    auto n = static_cast<int64_t>(std::ceil(record_t / cap - 1e-12));
    return record_t / static_cast<double>(std::max<int64_t>(n, 1));
}

struct Acquisition {
    std::vector<Pos> sources, receivers;
    Trace wavelet;  ///< sampled at dt_sim; shorter than the run = zero-padded
    double record_t = 0.0;
    double dt_sim = 0.0;
    int64_t rec_stride = 1;

    int64_t n_steps() const { return static_cast<int64_t>(std::llround(record_t / dt_sim)); }

    TimeGrid recording_grid() const {
        return TimeGrid{n_steps() / rec_stride + 1, dt_sim * static_cast<double>(rec_stride), 0.0};
    }

    void validate(const SlownessModel& model, const SimParams& p) const {
        require(!sources.empty(), "Acquisition: at least one source required");
        require(!receivers.empty(), "Acquisition: at least one receiver required");
        auto inside = [&](const Pos& q) {
            return q.x >= 0.0 && q.x <= model.width() && q.z >= 0.0 && q.z <= model.depth();
        };
        for (const auto& s : sources)
            require(inside(s), "Acquisition: source outside the physical domain");
        for (const auto& r : receivers)
            require(inside(r), "Acquisition: receiver outside the physical domain");
        require(std::isfinite(record_t) && record_t > 0.0, "Acquisition: record_t must be > 0");
        require(std::isfinite(dt_sim) && dt_sim > 0.0, "Acquisition: dt_sim must be > 0");
        require(dt_sim <= cfl_limit(model, p.cfl_safety) * (1.0 + 1e-12),
                "Acquisition: dt_sim violates the CFL bound");
        int64_t n = n_steps();
        require(n >= 1, "Acquisition: record_t shorter than one step");
        require(std::fabs(record_t - static_cast<double>(n) * dt_sim) <= 1e-9 * record_t,
                "Acquisition: record_t must be an integer number of steps");
        require(rec_stride >= 1 && n % rec_stride == 0,
                "Acquisition: recording stride must divide the step count");
        require(n % p.snapshot_stride == 0,
                "Acquisition: snapshot stride must divide the step count");
        wavelet.grid.validate();
        require(std::fabs(wavelet.grid.dt - dt_sim) <= 1e-9 * dt_sim,
                "Acquisition: wavelet must be sampled at dt_sim");
        require(all_finite(wavelet.a), "Acquisition: non-finite wavelet sample");
    }
};

struct ShotGather {
    TimeGrid grid;
    std::vector<Pos> receivers;
    std::vector<Vec> traces;  ///< traces[r][k]

    void validate() const {
        grid.validate();
        require(traces.size() == receivers.size(), "ShotGather: trace/receiver count mismatch");
        for (const auto& t : traces) {
            require(t.size() == static_cast<size_t>(grid.nt), "ShotGather: trace length mismatch");
            require(all_finite(t), "ShotGather: non-finite sample");
        }
    }

    Trace trace(size_t r) const { return Trace{grid, traces.at(r)}; }
};

/// Snapshots on the physical grid plus the boundary data of one solve:
/// receiver gather for forward runs, wavelet sensitivities for adjoint runs.
struct Wavefield {
    int64_t nx = 0, nz = 0;
    double dx = 0.0, dz = 0.0;
    int64_t stride = 1;
    double dt_snap = 0.0;
    std::vector<Vec> snapshots;  ///< z-fastest physical frames
    ShotGather gather;
    Vec source_samples;
};

namespace detail {

/// Padded-grid leapfrog kernel with quadratic-profile damping layers on the
/// sides and bottom, a pressure-free top surface, and 2 Dirichlet ghost
/// cells all around (absorbing mode), or a bare periodic grid.
class FdKernel {
  public:
    FdKernel(const SlownessModel& model, const SimParams& p, double dt)
        : nx_(model.nx), nz_(model.nz), dx_(model.dx), dz_(model.dz), dt_(dt),
          periodic_(p.boundary == BoundaryMode::periodic) {
        for (double m : model.m)
            require(std::isfinite(m) && m > 0.0, "FdKernel: squared slowness must be positive");
        if (periodic_) {
            W_ = static_cast<size_t>(nx_);
            H_ = static_cast<size_t>(nz_);
            px0_ = 0;
            pz0_ = 0;
        } else {
            W_ = static_cast<size_t>(nx_ + 2 * (p.npml + 2));
            H_ = static_cast<size_t>(2 + nz_ + p.npml + 2);
            px0_ = p.npml + 2;
            pz0_ = 2;
        }
        const size_t n = W_ * H_;
        dtm_.resize(n);
        d1_.assign(n, 1.0);
        c2_.assign(n, 2.0);
        c3_.assign(n, 1.0);
        m_pad_.resize(n);

        for (size_t X = 0; X < W_; ++X) {
            int64_t ix = std::clamp<int64_t>(static_cast<int64_t>(X) - px0_, 0, nx_ - 1);
            for (size_t Z = 0; Z < H_; ++Z) {
                int64_t iz = std::clamp<int64_t>(static_cast<int64_t>(Z) - pz0_, 0, nz_ - 1);
                m_pad_[idx(X, Z)] = model.at(ix, iz);
                dtm_[idx(X, Z)] = dt * dt / model.at(ix, iz);
            }
        }

        if (!periodic_) {
            double c_ref = p.pml_velocity > 0.0 ? p.pml_velocity : model.c_max();
            double smax_x = 1.5 * c_ref * std::log(1.0 / p.pml_reflect) /
                            (static_cast<double>(p.npml) * dx_);
            double smax_z = 1.5 * c_ref * std::log(1.0 / p.pml_reflect) /
                            (static_cast<double>(p.npml) * dz_);
            auto ramp = [](double depth, double width) {
                double r = depth / width;
                return r * r;
            };
            for (size_t X = 0; X < W_; ++X) {
                double sx = 0.0;
                auto Xi = static_cast<int64_t>(X);
                if (Xi < px0_) sx = smax_x * ramp(static_cast<double>(px0_ - Xi), static_cast<double>(p.npml));
                if (Xi > px0_ + nx_ - 1)
                    sx = smax_x * ramp(static_cast<double>(Xi - (px0_ + nx_ - 1)), static_cast<double>(p.npml));
                for (size_t Z = 0; Z < H_; ++Z) {
                    auto Zi = static_cast<int64_t>(Z);
                    double sz = 0.0;
                    if (Zi > pz0_ + nz_ - 1)
                        sz = smax_z * ramp(static_cast<double>(Zi - (pz0_ + nz_ - 1)), static_cast<double>(p.npml));
                    double s = sx + sz;
                    size_t i = idx(X, Z);
                    d1_[i] = 1.0 / (1.0 + s * dt);
                    c2_[i] = 2.0 - s * s * dt * dt;
                    c3_[i] = 1.0 - s * dt;
                }
            }
        }
    }

    size_t idx(size_t X, size_t Z) const { return X * H_ + Z; }
    size_t phys(int64_t ix, int64_t iz) const {
        return idx(static_cast<size_t>(px0_ + ix), static_cast<size_t>(pz0_ + iz));
    }
    size_t cells() const { return W_ * H_; }
    size_t width() const { return W_; }
    size_t height() const { return H_; }
    double dt() const { return dt_; }
    const Vec& d1() const { return d1_; }
    const Vec& c3() const { return c3_; }
    const Vec& dtm() const { return dtm_; }
    const Vec& m_pad() const { return m_pad_; }

    /// u_next <- damped leapfrog step of (u_prev, u_cur); boundary stays 0.
    void step_forward(const Vec& u_prev, const Vec& u_cur, Vec& u_next) const {
        if (periodic_) {
            step_periodic(u_prev, u_cur, u_next);
            return;
        }
        const double cx = 1.0 / (dx_ * dx_), cz = 1.0 / (dz_ * dz_);
        const size_t H = H_;
        for (size_t X = 2; X + 2 < W_; ++X) {
            const double* um = u_cur.data() + (X - 2) * H;
            const double* ul = u_cur.data() + (X - 1) * H;
            const double* uc = u_cur.data() + X * H;
            const double* ur = u_cur.data() + (X + 1) * H;
            const double* up = u_cur.data() + (X + 2) * H;
            const double* prev = u_prev.data() + X * H;
            double* out = u_next.data() + X * H;
            const double* f1 = d1_.data() + X * H;
            const double* f2 = c2_.data() + X * H;
            const double* f3 = c3_.data() + X * H;
            const double* fm = dtm_.data() + X * H;
            for (size_t Z = 3; Z + 2 < H; ++Z) {
                double lap = cx * (-1.0 / 12.0 * (um[Z] + up[Z]) + 4.0 / 3.0 * (ul[Z] + ur[Z]) -
                                   2.5 * uc[Z]) +
                             cz * (-1.0 / 12.0 * (uc[Z - 2] + uc[Z + 2]) +
                                   4.0 / 3.0 * (uc[Z - 1] + uc[Z + 1]) - 2.5 * uc[Z]);
                out[Z] = f1[Z] * (f2[Z] * uc[Z] - f3[Z] * prev[Z] + fm[Z] * lap);
            }
        }
    }

    /// out <- c2 .* y + Lap(dtm .* y) on the interior; y must be zero on the
    /// boundary bands. Together with the diagonal damping factors this is the
    /// exact transpose of step_forward's dependence on u_cur.
    void step_adjoint(const Vec& y, Vec& q, Vec& out) const {
        for (size_t i = 0; i < cells(); ++i) q[i] = dtm_[i] * y[i];
        if (periodic_) {
            step_adjoint_periodic(y, q, out);
            return;
        }
        const double cx = 1.0 / (dx_ * dx_), cz = 1.0 / (dz_ * dz_);
        const size_t H = H_;
        for (size_t X = 2; X + 2 < W_; ++X) {
            const double* qm = q.data() + (X - 2) * H;
            const double* ql = q.data() + (X - 1) * H;
            const double* qc = q.data() + X * H;
            const double* qr = q.data() + (X + 1) * H;
            const double* qp = q.data() + (X + 2) * H;
            const double* yc = y.data() + X * H;
            const double* f2 = c2_.data() + X * H;
            double* out_c = out.data() + X * H;
            for (size_t Z = 3; Z + 2 < H; ++Z) {
                double lap = cx * (-1.0 / 12.0 * (qm[Z] + qp[Z]) + 4.0 / 3.0 * (ql[Z] + qr[Z]) -
                                   2.5 * qc[Z]) +
                             cz * (-1.0 / 12.0 * (qc[Z - 2] + qc[Z + 2]) +
                                   4.0 / 3.0 * (qc[Z - 1] + qc[Z + 1]) - 2.5 * qc[Z]);
                out_c[Z] = f2[Z] * yc[Z] + lap;
            }
        }
    }

    /// Zero the non-updated bands (ghosts, walls, the free-surface row).
    void mask_boundary(Vec& v) const {
        if (periodic_) return;
        for (size_t X = 0; X < W_; ++X)
            for (size_t Z : {size_t{0}, size_t{1}, size_t{2}, H_ - 2, H_ - 1}) v[idx(X, Z)] = 0.0;
        for (size_t Z = 0; Z < H_; ++Z) {
            v[idx(0, Z)] = v[idx(1, Z)] = 0.0;
            v[idx(W_ - 2, Z)] = v[idx(W_ - 1, Z)] = 0.0;
        }
    }

    struct Stencil {
        size_t cell[4];
        double w[4];
    };

    Stencil bilinear(const Pos& pos) const {
        double gx = pos.x / dx_, gz = pos.z / dz_;
        auto ix0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(gx)), 0, nx_ - 2);
        auto iz0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(gz)), 0, nz_ - 2);
        double fx = gx - static_cast<double>(ix0), fz = gz - static_cast<double>(iz0);
        Stencil s;
        s.cell[0] = phys(ix0, iz0);
        s.cell[1] = phys(ix0 + 1, iz0);
        s.cell[2] = phys(ix0, iz0 + 1);
        s.cell[3] = phys(ix0 + 1, iz0 + 1);
        s.w[0] = (1.0 - fx) * (1.0 - fz);
        s.w[1] = fx * (1.0 - fz);
        s.w[2] = (1.0 - fx) * fz;
        s.w[3] = fx * fz;
        return s;
    }

    void copy_physical(const Vec& u, Vec& frame) const {
        frame.resize(static_cast<size_t>(nx_ * nz_));
        for (int64_t ix = 0; ix < nx_; ++ix)
            for (int64_t iz = 0; iz < nz_; ++iz)
                frame[static_cast<size_t>(ix * nz_ + iz)] = u[phys(ix, iz)];
    }

    void check_finite(const Vec& u, int64_t step, const char* where) const {
        if (!all_finite(u)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s: non-finite field at step %lld", where,
                          static_cast<long long>(step));
            throw numerical_error(buf);
        }
    }

  private:
    void step_periodic(const Vec& u_prev, const Vec& u_cur, Vec& u_next) const {
        const double cx = 1.0 / (dx_ * dx_), cz = 1.0 / (dz_ * dz_);
        const auto W = static_cast<int64_t>(W_), H = static_cast<int64_t>(H_);
        for (int64_t X = 0; X < W; ++X) {
            int64_t xm2 = (X - 2 + W) % W, xm1 = (X - 1 + W) % W;
            int64_t xp1 = (X + 1) % W, xp2 = (X + 2) % W;
            for (int64_t Z = 0; Z < H; ++Z) {
                int64_t zm2 = (Z - 2 + H) % H, zm1 = (Z - 1 + H) % H;
                int64_t zp1 = (Z + 1) % H, zp2 = (Z + 2) % H;
                size_t i = idx(static_cast<size_t>(X), static_cast<size_t>(Z));
                double lap =
                    cx * (-1.0 / 12.0 *
                              (u_cur[idx(static_cast<size_t>(xm2), static_cast<size_t>(Z))] +
                               u_cur[idx(static_cast<size_t>(xp2), static_cast<size_t>(Z))]) +
                          4.0 / 3.0 *
                              (u_cur[idx(static_cast<size_t>(xm1), static_cast<size_t>(Z))] +
                               u_cur[idx(static_cast<size_t>(xp1), static_cast<size_t>(Z))]) -
                          2.5 * u_cur[i]) +
                    cz * (-1.0 / 12.0 *
                              (u_cur[idx(static_cast<size_t>(X), static_cast<size_t>(zm2))] +
                               u_cur[idx(static_cast<size_t>(X), static_cast<size_t>(zp2))]) +
                          4.0 / 3.0 *
                              (u_cur[idx(static_cast<size_t>(X), static_cast<size_t>(zm1))] +
                               u_cur[idx(static_cast<size_t>(X), static_cast<size_t>(zp1))]) -
                          2.5 * u_cur[i]);
                u_next[i] = 2.0 * u_cur[i] - u_prev[i] + dtm_[i] * lap;
            }
        }
    }

    void step_adjoint_periodic(const Vec& y, const Vec& q, Vec& out) const {
        const double cx = 1.0 / (dx_ * dx_), cz = 1.0 / (dz_ * dz_);
        const auto W = static_cast<int64_t>(W_), H = static_cast<int64_t>(H_);
        for (int64_t X = 0; X < W; ++X) {
            int64_t xm2 = (X - 2 + W) % W, xm1 = (X - 1 + W) % W;
            int64_t xp1 = (X + 1) % W, xp2 = (X + 2) % W;
            for (int64_t Z = 0; Z < H; ++Z) {
                int64_t zm2 = (Z - 2 + H) % H, zm1 = (Z - 1 + H) % H;
                int64_t zp1 = (Z + 1) % H, zp2 = (Z + 2) % H;
                size_t i = idx(static_cast<size_t>(X), static_cast<size_t>(Z));
                double lap =
                    cx * (-1.0 / 12.0 *
                              (q[idx(static_cast<size_t>(xm2), static_cast<size_t>(Z))] +
                               q[idx(static_cast<size_t>(xp2), static_cast<size_t>(Z))]) +
                          4.0 / 3.0 *
                              (q[idx(static_cast<size_t>(xm1), static_cast<size_t>(Z))] +
                               q[idx(static_cast<size_t>(xp1), static_cast<size_t>(Z))]) -
                          2.5 * q[i]) +
                    cz * (-1.0 / 12.0 *
                              (q[idx(static_cast<size_t>(X), static_cast<size_t>(zm2))] +
                               q[idx(static_cast<size_t>(X), static_cast<size_t>(zp2))]) +
                          4.0 / 3.0 *
                              (q[idx(static_cast<size_t>(X), static_cast<size_t>(zm1))] +
                               q[idx(static_cast<size_t>(X), static_cast<size_t>(zp1))]) -
                          2.5 * q[i]);
                out[i] = 2.0 * y[i] + lap;
            }
        }
    }

    int64_t nx_, nz_;
    double dx_, dz_, dt_;
    bool periodic_;
    size_t W_ = 0, H_ = 0;
    int64_t px0_ = 0, pz0_ = 0;
    Vec dtm_, d1_, c2_, c3_, m_pad_;
};

}  // namespace detail

/// Forward leapfrog solve of one shot; snapshots every snapshot_stride steps.
inline Wavefield simulate_forward(const SlownessModel& model, const Acquisition& acq, size_t shot,
                                  const SimParams& params = {}) {
    params.validate();
    acq.validate(model, params);
    require(shot < acq.sources.size(), "simulate_forward: shot index out of range");

    detail::FdKernel K(model, params, acq.dt_sim);
    const int64_t N = acq.n_steps();
    const double inv_area = 1.0 / (model.dx * model.dz);
    auto src = K.bilinear(acq.sources[shot]);
    std::vector<detail::FdKernel::Stencil> rec(acq.receivers.size());
    for (size_t r = 0; r < acq.receivers.size(); ++r) rec[r] = K.bilinear(acq.receivers[r]);

    Wavefield out;
    out.nx = model.nx;
    out.nz = model.nz;
    out.dx = model.dx;
    out.dz = model.dz;
    out.stride = params.snapshot_stride;
    out.dt_snap = acq.dt_sim * static_cast<double>(params.snapshot_stride);
    out.snapshots.resize(static_cast<size_t>(N / params.snapshot_stride) + 1);
    out.gather.grid = acq.recording_grid();
    out.gather.receivers = acq.receivers;
    out.gather.traces.assign(acq.receivers.size(), Vec(static_cast<size_t>(out.gather.grid.nt), 0.0));

    Vec u_prev(K.cells(), 0.0), u_cur(K.cells(), 0.0), u_next(K.cells(), 0.0);
    K.copy_physical(u_cur, out.snapshots[0]);

    for (int64_t n = 0; n < N; ++n) {
        K.step_forward(u_prev, u_cur, u_next);
        double w = n < acq.wavelet.grid.nt ? acq.wavelet.a[static_cast<size_t>(n)] : 0.0;
        if (w != 0.0)
            for (int c = 0; c < 4; ++c) {
                size_t i = src.cell[c];
                u_next[i] += K.d1()[i] * K.dtm()[i] * w * src.w[c] * inv_area;
            }
        K.mask_boundary(u_next);
        std::swap(u_prev, u_cur);
        std::swap(u_cur, u_next);
        int64_t s = n + 1;
        if (s % acq.rec_stride == 0) {
            auto j = static_cast<size_t>(s / acq.rec_stride);
            for (size_t r = 0; r < rec.size(); ++r) {
                double v = 0.0;
                for (int c = 0; c < 4; ++c) v += rec[r].w[c] * u_cur[rec[r].cell[c]];
                out.gather.traces[r][j] = v;
            }
        }
        if (s % params.snapshot_stride == 0)
            K.copy_physical(u_cur, out.snapshots[static_cast<size_t>(s / params.snapshot_stride)]);
        if (s % 128 == 0 || s == N) K.check_finite(u_cur, s, "simulate_forward");
    }
    return out;
}

/// Reverse-time solve of the exact discrete transpose, driven by an adjoint
/// source on the recording grid. Snapshots hold the imaging-ready multiplier
/// field; source_samples holds the objective sensitivity to each wavelet
/// sample of the given shot.
inline Wavefield simulate_adjoint(const SlownessModel& model, const Acquisition& acq, size_t shot,
                                  const ShotGather& adj_src, const SimParams& params = {}) {
    params.validate();
    acq.validate(model, params);
    require(shot < acq.sources.size(), "simulate_adjoint: shot index out of range");
    adj_src.validate();
    require(adj_src.grid.same_as(acq.recording_grid()),
            "simulate_adjoint: adjoint source grid differs from the recording grid");
    require(adj_src.receivers.size() == acq.receivers.size(),
            "simulate_adjoint: receiver count mismatch");
    for (size_t r = 0; r < adj_src.receivers.size(); ++r)
        require(adj_src.receivers[r].x == acq.receivers[r].x &&
                    adj_src.receivers[r].z == acq.receivers[r].z,
                "simulate_adjoint: receiver positions differ from the acquisition");

    detail::FdKernel K(model, params, acq.dt_sim);
    const int64_t N = acq.n_steps();
    const double inv_area = 1.0 / (model.dx * model.dz);
    auto src = K.bilinear(acq.sources[shot]);
    std::vector<detail::FdKernel::Stencil> rec(acq.receivers.size());
    for (size_t r = 0; r < acq.receivers.size(); ++r) rec[r] = K.bilinear(acq.receivers[r]);

    Wavefield out;
    out.nx = model.nx;
    out.nz = model.nz;
    out.dx = model.dx;
    out.dz = model.dz;
    out.stride = params.snapshot_stride;
    out.dt_snap = acq.dt_sim * static_cast<double>(params.snapshot_stride);
    out.snapshots.resize(static_cast<size_t>(N / params.snapshot_stride));
    out.source_samples.assign(static_cast<size_t>(N), 0.0);

    Vec lam_next(K.cells(), 0.0);  // multiplier at step k+1
    Vec lam_nn(K.cells(), 0.0);    // multiplier at step k+2
    Vec lam_cur(K.cells(), 0.0);
    Vec y(K.cells(), 0.0), q(K.cells(), 0.0);

    for (int64_t k = N; k >= 1; --k) {
        for (size_t i = 0; i < K.cells(); ++i) y[i] = K.d1()[i] * lam_next[i];
        K.mask_boundary(y);
        K.step_adjoint(y, q, lam_cur);
        for (size_t i = 0; i < K.cells(); ++i) lam_cur[i] -= K.c3()[i] * K.d1()[i] * lam_nn[i];
        if (k % acq.rec_stride == 0) {
            auto j = static_cast<size_t>(k / acq.rec_stride);
            for (size_t r = 0; r < rec.size(); ++r) {
                double g = adj_src.traces[r][j];
                if (g == 0.0) continue;
                for (int c = 0; c < 4; ++c) lam_cur[rec[r].cell[c]] += rec[r].w[c] * g;
            }
        }
        K.mask_boundary(lam_cur);
        // multiplier-derived outputs pair with forward step k-1
        double s_acc = 0.0;
        for (int c = 0; c < 4; ++c) {
            size_t i = src.cell[c];
            s_acc += src.w[c] * K.dtm()[i] * K.d1()[i] * lam_cur[i] * inv_area;
        }
        out.source_samples[static_cast<size_t>(k - 1)] = s_acc;
        if ((k - 1) % params.snapshot_stride == 0) {
            auto j = static_cast<size_t>((k - 1) / params.snapshot_stride);
            Vec& frame = out.snapshots[j];
            frame.resize(static_cast<size_t>(model.nx * model.nz));
            for (int64_t ix = 0; ix < model.nx; ++ix)
                for (int64_t iz = 0; iz < model.nz; ++iz) {
                    size_t i = K.phys(ix, iz);
                    frame[static_cast<size_t>(ix * model.nz + iz)] =
                        out.dt_snap * K.d1()[i] * lam_cur[i] / K.m_pad()[i];
                }
        }
        std::swap(lam_nn, lam_next);
        std::swap(lam_next, lam_cur);
        if (k % 128 == 0 || k == 1) K.check_finite(lam_next, k, "simulate_adjoint");
    }
    return out;
}

/// Zero-lag correlation of the multiplier field with the second time
/// derivative of the forward field: the objective's model derivative.
inline ModelGradient imaging_condition(const Wavefield& fwd, const Wavefield& adj) {
    require(fwd.nx == adj.nx && fwd.nz == adj.nz, "imaging_condition: grid mismatch");
    require(fwd.stride == adj.stride && fwd.dt_snap == adj.dt_snap,
            "imaging_condition: snapshot stride mismatch");
    require(adj.snapshots.size() + 1 == fwd.snapshots.size(),
            "imaging_condition: snapshot count mismatch");
    const size_t cells = static_cast<size_t>(fwd.nx * fwd.nz);
    ModelGradient g{fwd.nx, fwd.nz, fwd.dx, fwd.dz, Vec(cells, 0.0)};
    for (size_t j = 0; j < adj.snapshots.size(); ++j) {
        const Vec& up = fwd.snapshots[j + 1];
        const Vec& uc = fwd.snapshots[j];
        const Vec* um = j > 0 ? &fwd.snapshots[j - 1] : nullptr;
        const Vec& v = adj.snapshots[j];
        for (size_t i = 0; i < cells; ++i) {
            double d2 = up[i] - 2.0 * uc[i] + (um ? (*um)[i] : 0.0);
            g.v[i] -= v[i] * d2 / fwd.dt_snap;
        }
    }
    return g;
}

}  // namespace otfwi
