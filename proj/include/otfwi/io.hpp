#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "otfwi/model.hpp"
#include "otfwi/wave.hpp"

namespace otfwi {

namespace detail {

// On-disk integers and doubles are 64-bit little-endian regardless of host.
inline void put_u64(std::vector<unsigned char>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::vector<unsigned char>& out, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(out, v);
}

/// Byte-stream cursor that reports truncation with the file path and offset.
struct ByteReader {
    const std::vector<unsigned char>& buf;
    const std::string& path;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (buf.size() - pos < n) {
            throw validation_error(path + ": truncated file, needed " + std::to_string(n) +
                                   " bytes for " + what + " at offset " + std::to_string(pos) +
                                   " but only " + std::to_string(buf.size() - pos) + " remain");
        }
    }

    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }

    double f64(const char* what) {
        uint64_t v = u64(what);
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }

    void finish() const {
        if (pos != buf.size())
            throw validation_error(path + ": " + std::to_string(buf.size() - pos) +
                                   " unexpected trailing bytes after the payload");
    }
};

/// Writes to `path + ".tmp"` and renames over the target so readers never
/// observe a half-written file.
inline void write_file_atomic(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw validation_error(tmp + ": cannot open for writing");
    size_t written = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
    bool ok = written == bytes.size() && std::fflush(f) == 0;
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) {
        std::remove(tmp.c_str());
        throw validation_error(tmp + ": short write");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw validation_error(path + ": cannot replace target file");
    }
}

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw validation_error(path + ": cannot open file");
    std::vector<unsigned char> bytes;
    unsigned char chunk[65536];
    size_t n;
    while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0) bytes.insert(bytes.end(), chunk, chunk + n);
    bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) throw validation_error(path + ": read error");
    return bytes;
}

constexpr char grid_magic[9] = "OTFWIGRD";
constexpr char gather_magic[9] = "OTFWIGTH";
constexpr uint64_t format_version = 1;

inline void put_header(std::vector<unsigned char>& out, const char* magic) {
    out.insert(out.end(), magic, magic + 8);
    put_u64(out, format_version);
}

inline void check_header(ByteReader& r, const char* magic, const char* kind) {
    r.need(8, "magic");
    if (std::memcmp(r.buf.data() + r.pos, magic, 8) != 0)
        throw validation_error(r.path + ": bad magic, not a " + kind + " file");
    r.pos += 8;
    uint64_t version = r.u64("version");
    if (version != format_version)
        throw validation_error(r.path + ": unsupported " + kind + " version " +
                               std::to_string(version) + " (expected " +
                               std::to_string(format_version) + ")");
}

/// Guards against absurd dimensions, which is also how a byte-swapped
/// (big-endian) header is detected: its counts decode to astronomical values.
inline int64_t checked_count(uint64_t v, const std::string& path, const char* field) {
    constexpr uint64_t limit = 100'000'000;
    if (v < 1 || v > limit)
        throw validation_error(path + ": field " + field + " = " + std::to_string(v) +
                               " is outside the supported range [1, " + std::to_string(limit) +
                               "] (wrong byte order or corrupt header?)");
    return static_cast<int64_t>(v);
}

inline double checked_positive(double v, const std::string& path, const char* field) {
    if (!std::isfinite(v) || v <= 0.0)
        throw validation_error(path + ": field " + field + " must be a positive finite number");
    return v;
}

}  // namespace detail

/// Grid file layout: 8-byte magic "OTFWIGRD", u64 version, u64 nx, u64 nz,
/// f64 dx, f64 dz, then nx*nz f64 cell values in z-fastest order.  All
/// integers and floats are little-endian 64-bit.
inline void write_field(const std::string& path, const Grid2D& g) {
    g.validate_shape();
    std::vector<unsigned char> out;
    out.reserve(48 + g.v.size() * 8);
    detail::put_header(out, detail::grid_magic);
    detail::put_u64(out, static_cast<uint64_t>(g.nx));
    detail::put_u64(out, static_cast<uint64_t>(g.nz));
    detail::put_f64(out, g.dx);
    detail::put_f64(out, g.dz);
    for (double v : g.v) detail::put_f64(out, v);
    detail::write_file_atomic(path, out);
}

inline Grid2D read_field(const std::string& path) {
    std::vector<unsigned char> bytes = detail::read_file(path);
    detail::ByteReader r{bytes, path};
    detail::check_header(r, detail::grid_magic, "grid");
    Grid2D g;
    g.nx = detail::checked_count(r.u64("nx"), path, "nx");
    g.nz = detail::checked_count(r.u64("nz"), path, "nz");
    g.dx = detail::checked_positive(r.f64("dx"), path, "dx");
    g.dz = detail::checked_positive(r.f64("dz"), path, "dz");
    if (g.nx * g.nz > 100'000'000)
        throw validation_error(path + ": grid has too many cells");
    size_t n = static_cast<size_t>(g.nx * g.nz);
    r.need(n * 8, "cell values");
    g.v.resize(n);
    for (size_t i = 0; i < n; ++i) g.v[i] = r.f64("cell value");
    r.finish();
    g.validate_shape();
    return g;
}

/// Models are stored as squared slowness in the grid file format.
inline void write_model(const std::string& path, const SlownessModel& m) {
    write_field(path, Grid2D{m.nx, m.nz, m.dx, m.dz, m.m});
}

inline SlownessModel read_model(const std::string& path) {
    Grid2D g = read_field(path);
    for (double v : g.v)
        if (!std::isfinite(v) || v <= 0.0)
            throw validation_error(path + ": squared slowness values must be positive");
    return SlownessModel{g.nx, g.nz, g.dx, g.dz, std::move(g.v)};
}

/// Gather file layout: 8-byte magic "OTFWIGTH", u64 version, u64 nt, f64 dt,
/// f64 t0, u64 receiver count, then per receiver f64 x and f64 z, then the
/// traces receiver-major (nt samples each).  Round trips are bit exact.
inline void write_gather(const std::string& path, const ShotGather& g) {
    g.validate();
    std::vector<unsigned char> out;
    out.reserve(56 + g.receivers.size() * (16 + static_cast<size_t>(g.grid.nt) * 8));
    detail::put_header(out, detail::gather_magic);
    detail::put_u64(out, static_cast<uint64_t>(g.grid.nt));
    detail::put_f64(out, g.grid.dt);
    detail::put_f64(out, g.grid.t0);
    detail::put_u64(out, static_cast<uint64_t>(g.receivers.size()));
    for (const Pos& p : g.receivers) {
        detail::put_f64(out, p.x);
        detail::put_f64(out, p.z);
    }
    for (const Vec& tr : g.traces)
        for (double v : tr) detail::put_f64(out, v);
    detail::write_file_atomic(path, out);
}

inline ShotGather read_gather(const std::string& path) {
    std::vector<unsigned char> bytes = detail::read_file(path);
    detail::ByteReader r{bytes, path};
    detail::check_header(r, detail::gather_magic, "gather");
    ShotGather g;
    g.grid.nt = detail::checked_count(r.u64("nt"), path, "nt");
    g.grid.dt = detail::checked_positive(r.f64("dt"), path, "dt");
    g.grid.t0 = r.f64("t0");
    if (!std::isfinite(g.grid.t0)) throw validation_error(path + ": field t0 must be finite");
    int64_t nr = detail::checked_count(r.u64("receiver count"), path, "receiver count");
    g.receivers.resize(static_cast<size_t>(nr));
    for (Pos& p : g.receivers) {
        p.x = r.f64("receiver x");
        p.z = r.f64("receiver z");
        if (!std::isfinite(p.x) || !std::isfinite(p.z))
            throw validation_error(path + ": receiver positions must be finite");
    }
    r.need(static_cast<size_t>(nr) * static_cast<size_t>(g.grid.nt) * 8, "trace samples");
    g.traces.resize(static_cast<size_t>(nr));
    for (Vec& tr : g.traces) {
        tr.resize(static_cast<size_t>(g.grid.nt));
        for (double& v : tr) v = r.f64("trace sample");
    }
    r.finish();
    g.validate();
    return g;
}

}  // namespace otfwi
