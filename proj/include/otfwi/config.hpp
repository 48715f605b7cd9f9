#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otfwi/io.hpp"
#include "otfwi/misfit.hpp"
#include "otfwi/model.hpp"
#include "otfwi/signal.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

namespace detail {

[[noreturn]] inline void cfg_error(const std::string& path, int line, const std::string& msg) {
    throw validation_error(path + ":" + std::to_string(line) + ": " + msg);
}

struct ConfigValue {
    std::string text;
    int line = 0;
    bool used = false;
};

struct ConfigSection {
    int line = 0;
    std::map<std::string, ConfigValue> kv;
};

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    return true;
}

/// Typed access to one section's keys; tracks which keys were consumed so
/// unknown ones can be reported with their line numbers.
struct SectionReader {
    const std::string& path;
    const std::string name;
    ConfigSection& sec;

    ConfigValue* find(const char* key) {
        auto it = sec.kv.find(key);
        if (it == sec.kv.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    [[noreturn]] void fail(const ConfigValue& v, const char* key, const std::string& msg) {
        cfg_error(path, v.line, "key '" + std::string(key) + "': " + msg);
    }

    [[noreturn]] void missing(const char* key) {
        cfg_error(path, sec.line, "section [" + name + "] is missing required key '" + key + "'");
    }

    double parse_num(const ConfigValue& v, const char* key) {
        const char* s = v.text.c_str();
        char* end = nullptr;
        double d = std::strtod(s, &end);
        if (end == s || *end != '\0' || !std::isfinite(d))
            fail(v, key, "cannot parse '" + v.text + "' as a number");
        return d;
    }

    double num(const char* key, double def) {
        ConfigValue* v = find(key);
        return v ? parse_num(*v, key) : def;
    }

    double num_req(const char* key) {
        ConfigValue* v = find(key);
        if (!v) missing(key);
        return parse_num(*v, key);
    }

    int64_t integer(const char* key, int64_t def) {
        ConfigValue* v = find(key);
        if (!v) return def;
        const char* s = v->text.c_str();
        char* end = nullptr;
        long long n = std::strtoll(s, &end, 10);
        if (end == s || *end != '\0') fail(*v, key, "cannot parse '" + v->text + "' as an integer");
        return n;
    }

    int64_t integer_req(const char* key) {
        if (!sec.kv.count(key)) missing(key);
        return integer(key, 0);
    }

    std::string word(const char* key, const std::string& def) {
        ConfigValue* v = find(key);
        return v ? v->text : def;
    }

    std::string word_req(const char* key) {
        ConfigValue* v = find(key);
        if (!v) missing(key);
        return v->text;
    }

    std::vector<std::string> tokens(const ConfigValue& v) {
        std::vector<std::string> out;
        size_t i = 0;
        while (i < v.text.size()) {
            while (i < v.text.size() && (v.text[i] == ' ' || v.text[i] == '\t')) ++i;
            size_t b = i;
            while (i < v.text.size() && v.text[i] != ' ' && v.text[i] != '\t') ++i;
            if (i > b) out.push_back(v.text.substr(b, i - b));
        }
        return out;
    }

    std::vector<double> list(const char* key) {
        ConfigValue* v = find(key);
        std::vector<double> out;
        if (!v) return out;
        for (const std::string& tok : tokens(*v)) {
            char* end = nullptr;
            double d = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0' || !std::isfinite(d))
                fail(*v, key, "cannot parse list item '" + tok + "' as a number");
            out.push_back(d);
        }
        if (out.empty()) fail(*v, key, "list must not be empty");
        return out;
    }

    /// Positions are whitespace-separated x,z pairs, e.g. "300,20 900,20".
    std::vector<Pos> positions(const char* key) {
        ConfigValue* v = find(key);
        std::vector<Pos> out;
        if (!v) return out;
        for (const std::string& tok : tokens(*v)) {
            size_t comma = tok.find(',');
            if (comma == std::string::npos || comma == 0 || comma + 1 >= tok.size())
                fail(*v, key, "position '" + tok + "' must look like x,z");
            char* end = nullptr;
            std::string xs = tok.substr(0, comma), zs = tok.substr(comma + 1);
            double x = std::strtod(xs.c_str(), &end);
            if (end == xs.c_str() || *end != '\0') fail(*v, key, "bad x coordinate in '" + tok + "'");
            double z = std::strtod(zs.c_str(), &end);
            if (end == zs.c_str() || *end != '\0') fail(*v, key, "bad z coordinate in '" + tok + "'");
            if (!std::isfinite(x) || !std::isfinite(z)) fail(*v, key, "non-finite position '" + tok + "'");
            out.push_back(Pos{x, z});
        }
        return out;
    }

    void check(bool ok, const char* key, const std::string& msg) {
        if (ok) return;
        auto it = sec.kv.find(key);
        int line = it != sec.kv.end() ? it->second.line : sec.line;
        cfg_error(path, line, "key '" + std::string(key) + "': " + msg);
    }

    void finish() {
        for (const auto& [key, v] : sec.kv)
            if (!v.used) cfg_error(path, v.line, "unknown key '" + key + "' in section [" + name + "]");
    }
};

}  // namespace detail

enum class ModelKind { homogeneous, two_layer, layered, linear_gradient, file };

struct ModelSpec {
    ModelKind kind = ModelKind::homogeneous;
    int64_t nx = 0, nz = 0;
    double dx = 0.0, dz = 0.0;
    double c = 1500.0;
    double c_top = 1500.0, c_bottom = 2500.0, interface_z = 0.0;
    std::vector<double> tops, velocities;
    double v0 = 1500.0, alpha = 0.7, water_depth = 50.0, water_c = 1500.0;
    std::string path;
};

struct AcqSpec {
    std::vector<Pos> sources, receivers;
    double f_peak = 10.0;
    double delay = 0.1;
    double record_t = 0.0;
    double dt = 0.0;  ///< 0 = derive from the model's stability bound
    int64_t rec_stride = 1;
    double band_lo = 0.0, band_hi = 0.0;  ///< Hz; both 0 = leave the wavelet alone
    double amplitude = 1.0;               ///< source strength; sets the misfit scale
};

struct ObjSpec {
    MisfitKind kind = MisfitKind::w2;
    double beta = 2.0;
    double floor_ratio = 0.0;

    ObjectiveSpec spec() const {
        ObjectiveSpec s;
        s.kind = kind;
        s.enc.scheme = EncodingScheme::softplus;
        s.enc.beta = beta;
        s.enc.floor_ratio = floor_ratio;
        return s;
    }
};

struct OptSpec {
    int64_t max_iters = 50;
    double stop_tol = 1e-5;
    int64_t memory = 10;
    double v_min = 1200.0, v_max = 3500.0;
    double smooth_sigma = 20.0;       ///< grid cells; 0 = start from the true model
    double grad_smooth_x = 0.0;       ///< grid cells; lateral gradient smoothing, 0 = off
    std::string initial = "smooth";   ///< "smooth" or "file"
    std::string initial_path;
};

struct LandscapeSpec {
    int64_t nx = 0, nz = 0;
    double dx = 0.0, dz = 0.0;
    double v0_min = 1600.0, v0_max = 2400.0;
    int64_t v0_count = 21;
    double alpha_min = 0.3, alpha_max = 1.1;
    int64_t alpha_count = 21;
    double ref_v0 = 2000.0, ref_alpha = 0.7;
    double water_depth = 50.0, water_c = 1500.0;
    std::vector<double> betas{0.8, 6.0};
    double floor_ratio = 0.0;
};

struct GeodesicSpec {
    double f_peak = 10.0;
    double delay = 0.0;
    double shift = 0.6;
    int64_t nt = 1001;
    double dt = 0.002;
    double t0 = -0.5;
    double beta = 50.0;
    double add_c = 0.5;
};

struct FreqscanSpec {
    int64_t nt = 256;
    double period = 1.0;
    double amp = 0.5;
    int64_t k_max = 8;
};

struct GradcheckSpec {
    int64_t ot_dirs = 20;
    double smooth_sigma = 3.0;
    std::vector<Pos> cells;  ///< probe cells as ix,iz pairs; empty = pick automatically
};

struct ExperimentConfig {
    std::string source_path, source_dir;
    std::optional<ModelSpec> model;
    std::optional<AcqSpec> acquisition;
    SimParams sim;
    std::optional<ObjSpec> objective;
    std::optional<OptSpec> optimizer;
    std::optional<LandscapeSpec> landscape;
    std::optional<GeodesicSpec> geodesic;
    std::optional<FreqscanSpec> freqscan;
    std::optional<GradcheckSpec> gradcheck;
    std::string out_dir = "out";
    uint64_t seed = 1234;

    std::string resolve(const std::string& p) const {
        if (p.empty() || p.front() == '/') return p;
        return source_dir.empty() ? p : source_dir + "/" + p;
    }

    template <class T>
    const T& need(const std::optional<T>& s, const char* section, const char* cmd) const {
        if (!s)
            throw validation_error(source_path + ": command '" + cmd +
                                   "' requires a [" + section + "] section");
        return *s;
    }

    const ModelSpec& need_model(const char* cmd) const { return need(model, "model", cmd); }
    const AcqSpec& need_acquisition(const char* cmd) const { return need(acquisition, "acquisition", cmd); }
    const ObjSpec& need_objective(const char* cmd) const { return need(objective, "objective", cmd); }
    const OptSpec& need_optimizer(const char* cmd) const { return need(optimizer, "optimizer", cmd); }

    SlownessModel build_model() const {
        const ModelSpec& m = need_model("(model build)");
        switch (m.kind) {
            case ModelKind::homogeneous:
                return homogeneous_model(m.nx, m.nz, m.dx, m.dz, m.c);
            case ModelKind::two_layer:
                return two_layer_model(m.nx, m.nz, m.dx, m.dz, m.c_top, m.c_bottom, m.interface_z);
            case ModelKind::layered:
                return layered_model(m.nx, m.nz, m.dx, m.dz, m.tops, m.velocities);
            case ModelKind::linear_gradient:
                return linear_gradient_model(m.nx, m.nz, m.dx, m.dz, m.v0, m.alpha,
                                             m.water_depth, m.water_c);
            default:
                return read_model(resolve(m.path));
        }
    }

    /// Assembles sources, receivers, and the (optionally band-limited) wavelet
    /// at the simulation step, and runs the full geometry/CFL validation.
    /// dt_override forces a step that is already known to be stable for every
    /// model the caller will simulate (e.g. up to the optimizer's v_max).
    Acquisition build_acquisition(const SlownessModel& m, double dt_override = 0.0) const {
        const AcqSpec& a = need_acquisition("(acquisition build)");
        double dts = dt_override > 0.0 ? dt_override
                                       : (a.dt > 0.0 ? a.dt : choose_dt(m, a.record_t, sim.cfl_safety));
        int64_t n = static_cast<int64_t>(std::llround(a.record_t / dts));
        require(n >= 1 && std::abs(static_cast<double>(n) * dts - a.record_t) <= 1e-9 * a.record_t,
                "acquisition: record_t must be a whole number of time steps");
        TimeGrid wg{n + 1, dts, 0.0};
        Trace w = ricker(a.f_peak, wg, a.delay);
        if (a.band_hi > 0.0) w = bandpass(w, a.band_lo, a.band_hi);
        if (a.amplitude != 1.0)
            for (double& s : w.a) s *= a.amplitude;
        Acquisition acq;
        acq.sources = a.sources;
        acq.receivers = a.receivers;
        acq.wavelet = std::move(w);
        acq.record_t = a.record_t;
        acq.dt_sim = dts;
        acq.rec_stride = a.rec_stride;
        acq.validate(m, sim);
        return acq;
    }
};

namespace detail {

inline ModelSpec parse_model(SectionReader& r) {
    ModelSpec m;
    std::string kind = r.word_req("kind");
    if (kind == "homogeneous") m.kind = ModelKind::homogeneous;
    else if (kind == "two_layer") m.kind = ModelKind::two_layer;
    else if (kind == "layered") m.kind = ModelKind::layered;
    else if (kind == "linear_gradient") m.kind = ModelKind::linear_gradient;
    else if (kind == "file") m.kind = ModelKind::file;
    else r.check(false, "kind", "must be homogeneous, two_layer, layered, linear_gradient, or file");

    if (m.kind == ModelKind::file) {
        m.path = r.word_req("path");
    } else {
        m.nx = r.integer_req("nx");
        m.nz = r.integer_req("nz");
        m.dx = r.num_req("dx");
        m.dz = r.num_req("dz");
        r.check(m.nx >= 2 && m.nz >= 2, "nx", "grid must be at least 2x2");
        r.check(m.dx > 0.0 && m.dz > 0.0, "dx", "spacings must be positive");
    }
    switch (m.kind) {
        case ModelKind::homogeneous:
            m.c = r.num_req("c");
            break;
        case ModelKind::two_layer:
            m.c_top = r.num_req("c_top");
            m.c_bottom = r.num_req("c_bottom");
            m.interface_z = r.num_req("interface_z");
            break;
        case ModelKind::layered:
            m.tops = r.list("tops");
            m.velocities = r.list("velocities");
            r.check(!m.tops.empty() && m.tops.size() == m.velocities.size(), "tops",
                    "tops and velocities must be non-empty lists of equal length");
            break;
        case ModelKind::linear_gradient:
            m.v0 = r.num_req("v0");
            m.alpha = r.num_req("alpha");
            m.water_depth = r.num("water_depth", m.water_depth);
            m.water_c = r.num("water_c", m.water_c);
            break;
        default:
            break;
    }
    r.finish();
    return m;
}

inline AcqSpec parse_acquisition(SectionReader& r) {
    AcqSpec a;
    a.sources = r.positions("sources");
    r.check(!a.sources.empty(), "sources", "at least one source is required");
    a.receivers = r.positions("receivers");
    if (ConfigValue* v = r.find("receiver_line")) {
        r.check(a.receivers.empty(), "receiver_line", "give receivers or receiver_line, not both");
        std::vector<std::string> toks = r.tokens(*v);
        if (toks.size() != 4) r.fail(*v, "receiver_line", "expected: count x_first x_last z");
        char* end = nullptr;
        long long cnt = std::strtoll(toks[0].c_str(), &end, 10);
        if (end == toks[0].c_str() || *end != '\0' || cnt < 2)
            r.fail(*v, "receiver_line", "count must be an integer >= 2");
        double x0 = std::strtod(toks[1].c_str(), nullptr);
        double x1 = std::strtod(toks[2].c_str(), nullptr);
        double z = std::strtod(toks[3].c_str(), nullptr);
        if (!std::isfinite(x0) || !std::isfinite(x1) || !std::isfinite(z))
            r.fail(*v, "receiver_line", "coordinates must be finite numbers");
        for (long long i = 0; i < cnt; ++i) {
            double f = static_cast<double>(i) / static_cast<double>(cnt - 1);
            a.receivers.push_back(Pos{x0 + f * (x1 - x0), z});
        }
    }
    r.check(!a.receivers.empty(), "receivers", "receivers or receiver_line is required");
    a.f_peak = r.num("f_peak", a.f_peak);
    a.delay = r.num("delay", a.delay);
    a.record_t = r.num_req("record_t");
    a.dt = r.num("dt", a.dt);
    a.rec_stride = r.integer("rec_stride", a.rec_stride);
    a.band_lo = r.num("band_lo", a.band_lo);
    a.band_hi = r.num("band_hi", a.band_hi);
    a.amplitude = r.num("amplitude", a.amplitude);
    r.check(a.f_peak > 0.0, "f_peak", "must be positive");
    r.check(a.amplitude > 0.0 && std::isfinite(a.amplitude), "amplitude", "must be positive and finite");
    r.check(a.record_t > 0.0, "record_t", "must be positive");
    r.check(a.dt >= 0.0, "dt", "must be >= 0 (0 selects the step automatically)");
    r.check(a.rec_stride >= 1, "rec_stride", "must be >= 1");
    r.check(a.band_lo >= 0.0 && a.band_hi >= 0.0, "band_lo", "band edges must be >= 0");
    r.check(a.band_hi == 0.0 || a.band_lo < a.band_hi, "band_hi", "band_lo must be below band_hi");
    r.finish();
    return a;
}

inline SimParams parse_simulation(SectionReader& r) {
    SimParams p;
    p.npml = r.integer("npml", p.npml);
    p.cfl_safety = r.num("cfl_safety", p.cfl_safety);
    p.pml_reflect = r.num("pml_reflect", p.pml_reflect);
    p.pml_velocity = r.num("pml_velocity", p.pml_velocity);
    p.snapshot_stride = r.integer("snapshot_stride", p.snapshot_stride);
    r.finish();
    p.validate();
    return p;
}

inline ObjSpec parse_objective(SectionReader& r) {
    ObjSpec o;
    std::string kind = r.word("kind", "w2");
    if (kind == "l2") o.kind = MisfitKind::l2;
    else if (kind == "w2") o.kind = MisfitKind::w2;
    else r.check(false, "kind", "must be l2 or w2");
    o.beta = r.num("beta", o.beta);
    o.floor_ratio = r.num("floor_ratio", o.floor_ratio);
    r.check(o.beta != 0.0, "beta", "must be nonzero");
    r.check(o.floor_ratio >= 0.0 && o.floor_ratio < 1.0, "floor_ratio", "must lie in [0, 1)");
    r.finish();
    return o;
}

inline OptSpec parse_optimizer(SectionReader& r) {
    OptSpec o;
    o.max_iters = r.integer("max_iters", o.max_iters);
    o.stop_tol = r.num("stop_tol", o.stop_tol);
    o.memory = r.integer("memory", o.memory);
    o.v_min = r.num("v_min", o.v_min);
    o.v_max = r.num("v_max", o.v_max);
    o.smooth_sigma = r.num("smooth_sigma", o.smooth_sigma);
    o.grad_smooth_x = r.num("grad_smooth_x", o.grad_smooth_x);
    o.initial = r.word("initial", o.initial);
    o.initial_path = r.word("initial_path", "");
    r.check(o.max_iters >= 1, "max_iters", "must be >= 1");
    r.check(o.stop_tol > 0.0, "stop_tol", "must be positive");
    r.check(o.memory >= 1, "memory", "must be >= 1");
    r.check(o.v_min >= 1000.0 && o.v_min < o.v_max && o.v_max <= 6000.0, "v_min",
            "velocity bounds must satisfy 1000 <= v_min < v_max <= 6000");
    r.check(o.smooth_sigma >= 0.0, "smooth_sigma", "must be >= 0");
    r.check(o.grad_smooth_x >= 0.0, "grad_smooth_x", "must be >= 0");
    r.check(o.initial == "smooth" || o.initial == "file", "initial", "must be smooth or file");
    r.check(o.initial != "file" || !o.initial_path.empty(), "initial_path",
            "required when initial = file");
    r.finish();
    return o;
}

inline LandscapeSpec parse_landscape(SectionReader& r) {
    LandscapeSpec l;
    l.nx = r.integer_req("nx");
    l.nz = r.integer_req("nz");
    l.dx = r.num_req("dx");
    l.dz = r.num_req("dz");
    r.check(l.nx >= 2 && l.nz >= 2, "nx", "grid must be at least 2x2");
    r.check(l.dx > 0.0 && l.dz > 0.0, "dx", "spacings must be positive");
    l.v0_min = r.num("v0_min", l.v0_min);
    l.v0_max = r.num("v0_max", l.v0_max);
    l.v0_count = r.integer("v0_count", l.v0_count);
    l.alpha_min = r.num("alpha_min", l.alpha_min);
    l.alpha_max = r.num("alpha_max", l.alpha_max);
    l.alpha_count = r.integer("alpha_count", l.alpha_count);
    l.ref_v0 = r.num("ref_v0", l.ref_v0);
    l.ref_alpha = r.num("ref_alpha", l.ref_alpha);
    l.water_depth = r.num("water_depth", l.water_depth);
    l.water_c = r.num("water_c", l.water_c);
    if (r.sec.kv.count("betas")) l.betas = r.list("betas");
    l.floor_ratio = r.num("floor_ratio", l.floor_ratio);
    r.check(l.v0_min < l.v0_max && l.alpha_min < l.alpha_max, "v0_min",
            "scan ranges must be nonempty");
    r.check(l.v0_count >= 2 && l.alpha_count >= 2, "v0_count", "scan needs >= 2 points per axis");
    r.check(l.ref_v0 >= l.v0_min && l.ref_v0 <= l.v0_max, "ref_v0", "must lie inside the v0 range");
    r.check(l.ref_alpha >= l.alpha_min && l.ref_alpha <= l.alpha_max, "ref_alpha",
            "must lie inside the alpha range");
    r.check(l.water_depth >= 0.0 && l.water_c > 0.0, "water_depth", "water layer must be physical");
    for (double b : l.betas) r.check(b != 0.0, "betas", "beta values must be nonzero");
    r.check(l.floor_ratio >= 0.0 && l.floor_ratio < 1.0, "floor_ratio", "must lie in [0, 1)");
    r.finish();
    return l;
}

inline GeodesicSpec parse_geodesic(SectionReader& r) {
    GeodesicSpec g;
    g.f_peak = r.num("f_peak", g.f_peak);
    g.delay = r.num("delay", g.delay);
    g.shift = r.num("shift", g.shift);
    g.nt = r.integer("nt", g.nt);
    g.dt = r.num("dt", g.dt);
    g.t0 = r.num("t0", g.t0);
    g.beta = r.num("beta", g.beta);
    g.add_c = r.num("add_c", g.add_c);
    r.check(g.f_peak > 0.0, "f_peak", "must be positive");
    r.check(g.nt >= 9, "nt", "must be >= 9");
    r.check(g.dt > 0.0, "dt", "must be positive");
    r.check(g.beta != 0.0, "beta", "must be nonzero");
    r.check(g.add_c > 0.0, "add_c", "must be positive");
    r.check(std::isfinite(g.shift), "shift", "must be finite");
    r.finish();
    return g;
}

inline FreqscanSpec parse_freqscan(SectionReader& r) {
    FreqscanSpec f;
    f.nt = r.integer("nt", f.nt);
    f.period = r.num("period", f.period);
    f.amp = r.num("amp", f.amp);
    f.k_max = r.integer("k_max", f.k_max);
    r.check(f.nt >= 32, "nt", "must be >= 32");
    r.check(f.period > 0.0, "period", "must be positive");
    r.check(f.amp > 0.0 && f.amp < 1.0, "amp", "must lie in (0, 1)");
    r.check(f.k_max >= 1 && f.k_max < f.nt / 4, "k_max", "must lie in [1, nt/4)");
    r.finish();
    return f;
}

inline GradcheckSpec parse_gradcheck(SectionReader& r) {
    GradcheckSpec g;
    g.ot_dirs = r.integer("ot_dirs", g.ot_dirs);
    g.smooth_sigma = r.num("smooth_sigma", g.smooth_sigma);
    g.cells = r.positions("cells");
    r.check(g.ot_dirs >= 1, "ot_dirs", "must be >= 1");
    r.check(g.smooth_sigma >= 0.0, "smooth_sigma", "must be >= 0");
    r.finish();
    return g;
}

}  // namespace detail

/// Parses and fully validates an experiment description.  The grammar is
/// sectioned key = value text: '#' starts a comment, [name] opens a section,
/// keys may not repeat within a section, and every key must be one the
/// section defines.  When the file describes a wave run, the model is built
/// and the acquisition is checked (geometry, CFL, file paths) here, before
/// any command starts computing.
inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error(path + ": cannot open config file");

    std::map<std::string, detail::ConfigSection> sections;
    std::string current;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string s = detail::trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') detail::cfg_error(path, lineno, "unterminated section header");
            std::string name = detail::trim(s.substr(1, s.size() - 2));
            if (!detail::valid_name(name))
                detail::cfg_error(path, lineno, "bad section name '" + name + "'");
            if (sections.count(name))
                detail::cfg_error(path, lineno, "duplicate section [" + name + "]");
            sections[name].line = lineno;
            current = name;
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            detail::cfg_error(path, lineno, "expected key = value or [section], got '" + s + "'");
        if (current.empty()) detail::cfg_error(path, lineno, "key outside of any section");
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (!detail::valid_name(key)) detail::cfg_error(path, lineno, "bad key name '" + key + "'");
        if (value.empty()) detail::cfg_error(path, lineno, "key '" + key + "' has an empty value");
        auto& sec = sections[current];
        if (sec.kv.count(key))
            detail::cfg_error(path, lineno, "duplicate key '" + key + "' in section [" + current + "]");
        sec.kv[key] = detail::ConfigValue{value, lineno, false};
    }

    ExperimentConfig cfg;
    cfg.source_path = path;
    size_t slash = path.find_last_of('/');
    cfg.source_dir = slash == std::string::npos ? "" : path.substr(0, slash);

    auto reader = [&](const char* name) {
        return detail::SectionReader{path, name, sections.at(name)};
    };
    for (const auto& [name, sec] : sections) {
        if (name == "model") {
            auto r = reader("model");
            cfg.model = detail::parse_model(r);
        } else if (name == "acquisition") {
            auto r = reader("acquisition");
            cfg.acquisition = detail::parse_acquisition(r);
        } else if (name == "simulation") {
            auto r = reader("simulation");
            cfg.sim = detail::parse_simulation(r);
        } else if (name == "objective") {
            auto r = reader("objective");
            cfg.objective = detail::parse_objective(r);
        } else if (name == "optimizer") {
            auto r = reader("optimizer");
            cfg.optimizer = detail::parse_optimizer(r);
        } else if (name == "landscape") {
            auto r = reader("landscape");
            cfg.landscape = detail::parse_landscape(r);
        } else if (name == "geodesic") {
            auto r = reader("geodesic");
            cfg.geodesic = detail::parse_geodesic(r);
        } else if (name == "freqscan") {
            auto r = reader("freqscan");
            cfg.freqscan = detail::parse_freqscan(r);
        } else if (name == "gradcheck") {
            auto r = reader("gradcheck");
            cfg.gradcheck = detail::parse_gradcheck(r);
        } else if (name == "output") {
            auto r = reader("output");
            cfg.out_dir = r.word("dir", cfg.out_dir);
            r.finish();
        } else if (name == "run") {
            auto r = reader("run");
            int64_t s = r.integer("seed", static_cast<int64_t>(cfg.seed));
            if (s < 0) detail::cfg_error(path, sec.line, "seed must be >= 0");
            cfg.seed = static_cast<uint64_t>(s);
            r.finish();
        } else {
            detail::cfg_error(path, sec.line, "unknown section [" + name + "]");
        }
    }

    // a config that describes a wave run must be solvable before any command
    // touches it: build the model (reads model files) and check the geometry
    // and time step now
    if (cfg.model && cfg.acquisition) {
        SlownessModel m = cfg.build_model();
        m.validate();
        cfg.build_acquisition(m);
    }
    return cfg;
}

}  // namespace otfwi
