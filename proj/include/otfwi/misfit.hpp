#pragma once

#include <atomic>
#include <exception>
#include <thread>

#include "otfwi/encoding.hpp"
#include "otfwi/ot.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

struct MisfitResult {
    double value = 0.0;
    ShotGather adjoint_source;
};

namespace detail {

inline void require_same_geometry(const ShotGather& a, const ShotGather& b, const char* where) {
    require(a.grid.same_as(b.grid), std::string(where) + ": recording grids differ");
    require(a.receivers.size() == b.receivers.size(),
            std::string(where) + ": receiver counts differ");
    for (size_t r = 0; r < a.receivers.size(); ++r)
        require(a.receivers[r].x == b.receivers[r].x && a.receivers[r].z == b.receivers[r].z,
                std::string(where) + ": receiver positions differ");
}

}  // namespace detail

/// Half the squared sample difference integrated over time and summed over
/// receivers; the adjoint source is the residual times the recording step.
inline MisfitResult l2_misfit(const ShotGather& syn, const ShotGather& obs) {
    syn.validate();
    obs.validate();
    detail::require_same_geometry(syn, obs, "l2_misfit");
    MisfitResult res;
    res.adjoint_source.grid = syn.grid;
    res.adjoint_source.receivers = syn.receivers;
    res.adjoint_source.traces.assign(syn.traces.size(), Vec(static_cast<size_t>(syn.grid.nt)));
    KahanSum total;
    for (size_t r = 0; r < syn.traces.size(); ++r) {
        for (size_t k = 0; k < syn.traces[r].size(); ++k) {
            double d = syn.traces[r][k] - obs.traces[r][k];
            total.add(d * d);
            res.adjoint_source.traces[r][k] = d * syn.grid.dt;
        }
    }
    res.value = 0.5 * total.value() * syn.grid.dt;
    return res;
}

/// Trace-by-trace quadratic transport distance between softplus-encoded
/// synthetic and observed traces; the adjoint source chains the transport
/// first variation through the encoding derivative.
inline MisfitResult w2_misfit(const ShotGather& syn, const ShotGather& obs,
                              const EncodingConfig& cfg) {
    syn.validate();
    obs.validate();
    detail::require_same_geometry(syn, obs, "w2_misfit");
    cfg.validate();
    require(cfg.scheme == EncodingScheme::softplus,
            "w2_misfit: only the softplus encoding has an exact adjoint");
    MisfitResult res;
    res.adjoint_source.grid = syn.grid;
    res.adjoint_source.receivers = syn.receivers;
    res.adjoint_source.traces.assign(syn.traces.size(), Vec(static_cast<size_t>(syn.grid.nt)));
    KahanSum total;
    for (size_t r = 0; r < syn.traces.size(); ++r) {
        Trace syn_r = syn.trace(r), obs_r = obs.trace(r);
        auto enc_syn = softplus_encode(syn_r, cfg);
        auto enc_obs = softplus_encode(obs_r, cfg);
        total.add(transport_cost(enc_obs.pdf, enc_syn.pdf));
        auto phi = transport_gradient(enc_obs.pdf, enc_syn.pdf);
        res.adjoint_source.traces[r] = encode_adjoint(syn_r, phi, cfg).a;
    }
    res.value = total.value();
    return res;
}

enum class MisfitKind { l2, w2 };

inline const char* to_string(MisfitKind k) { return k == MisfitKind::l2 ? "l2" : "w2"; }

struct ObjectiveSpec {
    MisfitKind kind = MisfitKind::l2;
    EncodingConfig enc;
};

inline MisfitResult evaluate_misfit(const ShotGather& syn, const ShotGather& obs,
                                    const ObjectiveSpec& spec) {
    return spec.kind == MisfitKind::l2 ? l2_misfit(syn, obs) : w2_misfit(syn, obs, spec.enc);
}

struct GradientResult {
    double value = 0.0;
    ModelGradient gradient;
};

/// Full objective and model derivative: per shot a forward solve, misfit and
/// adjoint source, reverse solve, and imaging; shots run on a small thread
/// pool and are reduced in fixed shot order.
inline GradientResult model_gradient(const SlownessModel& model, const Acquisition& acq,
                                     const std::vector<ShotGather>& obs, const ObjectiveSpec& spec,
                                     const SimParams& params = {}, size_t max_workers = 0) {
    require(obs.size() == acq.sources.size(),
            "model_gradient: need one observed gather per source");
    const size_t n_shots = obs.size();
    std::vector<double> values(n_shots, 0.0);
    std::vector<ModelGradient> grads(n_shots);
    std::vector<std::exception_ptr> errors(n_shots);

    auto run_shot = [&](size_t s) {
        try {
            auto fwd = simulate_forward(model, acq, s, params);
            auto mis = evaluate_misfit(fwd.gather, obs[s], spec);
            auto adj = simulate_adjoint(model, acq, s, mis.adjoint_source, params);
            grads[s] = imaging_condition(fwd, adj);
            values[s] = mis.value;
        } catch (...) {
            errors[s] = std::current_exception();
        }
    };

    size_t hw = max_workers ? max_workers : std::thread::hardware_concurrency();
    size_t workers = std::max<size_t>(1, std::min<size_t>(hw, n_shots));
    if (workers <= 1) {
        for (size_t s = 0; s < n_shots; ++s) run_shot(s);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t s = next.fetch_add(1); s < n_shots; s = next.fetch_add(1)) run_shot(s);
            });
        for (auto& t : pool) t.join();
    }
    for (size_t s = 0; s < n_shots; ++s)
        if (errors[s]) std::rethrow_exception(errors[s]);

    GradientResult res;
    res.gradient = ModelGradient{model.nx, model.nz, model.dx, model.dz,
                                 Vec(static_cast<size_t>(model.nx * model.nz), 0.0)};
    KahanSum total;
    for (size_t s = 0; s < n_shots; ++s) {
        total.add(values[s]);
        for (size_t i = 0; i < res.gradient.v.size(); ++i) res.gradient.v[i] += grads[s].v[i];
    }
    res.value = total.value();
    return res;
}

}  // namespace otfwi
