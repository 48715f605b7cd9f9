#include <catch2/catch_amalgamated.hpp>

#include "otfwi/config.hpp"
#include "otfwi/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace otfwi;
using Catch::Matchers::ContainsSubstring;

namespace {

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path dir;

    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("otfwi_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }

    static int& counter() {
        static int n = 0;
        return n;
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        std::string p = path(name);
        std::ofstream f(p);
        f << text;
        return p;
    }
};

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), {});
}

void dump(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Grid2D sample_grid() {
    Grid2D g{3, 2, 10.0, 12.5, {}};
    g.v = {1.5, -0.0, 1e-308, 2.25e-7, -3.75, 6.02e23};
    return g;
}

ShotGather sample_gather() {
    ShotGather g;
    g.grid = TimeGrid{4, 0.002, -0.5};
    g.receivers = {Pos{100.0, 20.0}, Pos{250.5, 30.25}};
    g.traces = {{0.0, 1.25, -2.5, 0.125}, {9.5, -0.0, 3.25e-12, -7.75}};
    return g;
}

}  // namespace

TEST_CASE("grid files round trip bit exactly", "[io]") {
    TempDir tmp;
    Grid2D g = sample_grid();
    std::string p = tmp.path("grid.bin");
    write_field(p, g);
    Grid2D back = read_field(p);

    REQUIRE(back.nx == g.nx);
    REQUIRE(back.nz == g.nz);
    REQUIRE(back.dx == g.dx);
    REQUIRE(back.dz == g.dz);
    REQUIRE(back.v.size() == g.v.size());
    REQUIRE(std::memcmp(back.v.data(), g.v.data(), g.v.size() * sizeof(double)) == 0);
    // -0.0 keeps its sign bit
    REQUIRE(std::signbit(back.v[1]));
}

TEST_CASE("model files store squared slowness and reject unphysical values", "[io]") {
    TempDir tmp;
    SlownessModel m = two_layer_model(5, 4, 10.0, 10.0, 1500.0, 2400.0, 20.0);
    std::string p = tmp.path("model.bin");
    write_model(p, m);
    SlownessModel back = read_model(p);
    REQUIRE(back.nx == m.nx);
    REQUIRE(back.nz == m.nz);
    REQUIRE(std::memcmp(back.m.data(), m.m.data(), m.m.size() * sizeof(double)) == 0);

    Grid2D bad = sample_grid();  // holds zeros and negatives
    std::string pb = tmp.path("bad.bin");
    write_field(pb, bad);
    REQUIRE_THROWS_MATCHES(read_model(pb), validation_error,
                           Catch::Matchers::MessageMatches(
                               ContainsSubstring("squared slowness values must be positive")));
}

TEST_CASE("gather files round trip bit exactly including t0", "[io]") {
    TempDir tmp;
    ShotGather g = sample_gather();
    std::string p = tmp.path("gather.bin");
    write_gather(p, g);
    ShotGather back = read_gather(p);

    REQUIRE(back.grid.nt == g.grid.nt);
    REQUIRE(back.grid.dt == g.grid.dt);
    REQUIRE(back.grid.t0 == g.grid.t0);
    REQUIRE(back.receivers.size() == g.receivers.size());
    for (size_t r = 0; r < g.receivers.size(); ++r) {
        REQUIRE(back.receivers[r].x == g.receivers[r].x);
        REQUIRE(back.receivers[r].z == g.receivers[r].z);
        REQUIRE(std::memcmp(back.traces[r].data(), g.traces[r].data(),
                            g.traces[r].size() * sizeof(double)) == 0);
    }
}

TEST_CASE("truncated files are reported with the starving field and offset", "[io]") {
    TempDir tmp;
    std::string p = tmp.path("grid.bin");
    write_field(p, sample_grid());
    std::vector<unsigned char> bytes = slurp(p);

    std::string cut = tmp.path("cut.bin");
    dump(cut, std::vector<unsigned char>(bytes.begin(), bytes.begin() + 20));
    REQUIRE_THROWS_MATCHES(read_field(cut), validation_error,
                           Catch::Matchers::MessageMatches(ContainsSubstring("truncated file")));

    // drop the last sample: the payload read starves
    std::string chop = tmp.path("chop.bin");
    dump(chop, std::vector<unsigned char>(bytes.begin(), bytes.end() - 8));
    REQUIRE_THROWS_MATCHES(
        read_field(chop), validation_error,
        Catch::Matchers::MessageMatches(ContainsSubstring("cell values")));
}

TEST_CASE("foreign and damaged headers are rejected", "[io]") {
    TempDir tmp;
    std::string p = tmp.path("grid.bin");
    write_field(p, sample_grid());
    std::vector<unsigned char> bytes = slurp(p);

    SECTION("bad magic") {
        auto b = bytes;
        b[0] ^= 0x40;
        std::string q = tmp.path("magic.bin");
        dump(q, b);
        REQUIRE_THROWS_MATCHES(
            read_field(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("not a grid file")));
        // a gather reader rejects a grid file the same way
        REQUIRE_THROWS_MATCHES(
            read_gather(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("not a gather file")));
    }

    SECTION("unsupported version") {
        auto b = bytes;
        b[8] = 2;
        std::string q = tmp.path("version.bin");
        dump(q, b);
        REQUIRE_THROWS_MATCHES(
            read_field(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("unsupported grid version 2")));
    }

    SECTION("byte-swapped counts decode to absurd sizes") {
        auto b = bytes;
        // nx = 3 stored little-endian at offset 16; reverse to fake big-endian
        std::reverse(b.begin() + 16, b.begin() + 24);
        std::string q = tmp.path("endian.bin");
        dump(q, b);
        REQUIRE_THROWS_MATCHES(
            read_field(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("wrong byte order")));
    }

    SECTION("trailing bytes") {
        auto b = bytes;
        b.push_back(0);
        std::string q = tmp.path("trail.bin");
        dump(q, b);
        REQUIRE_THROWS_MATCHES(
            read_field(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("unexpected trailing bytes")));
    }

    SECTION("plausible header with an absurd cell total") {
        std::vector<unsigned char> b;
        detail::put_header(b, detail::grid_magic);
        detail::put_u64(b, 20000);
        detail::put_u64(b, 20000);
        detail::put_f64(b, 1.0);
        detail::put_f64(b, 1.0);
        std::string q = tmp.path("huge.bin");
        dump(q, b);
        REQUIRE_THROWS_MATCHES(
            read_field(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("too many cells")));
    }
}

TEST_CASE("writes are atomic: no temp file survives and targets are replaced whole",
          "[io]") {
    TempDir tmp;
    std::string p = tmp.path("grid.bin");
    write_field(p, sample_grid());
    REQUIRE_FALSE(std::filesystem::exists(p + ".tmp"));

    // overwriting keeps the file readable and single-versioned
    Grid2D g2{2, 2, 5.0, 5.0, {1.0, 2.0, 3.0, 4.0}};
    write_field(p, g2);
    Grid2D back = read_field(p);
    REQUIRE(back.nx == 2);
    REQUIRE(back.v == g2.v);

    REQUIRE_THROWS_MATCHES(
        write_field(tmp.path("no_such_dir/grid.bin"), g2), validation_error,
        Catch::Matchers::MessageMatches(ContainsSubstring("cannot open for writing")));
}

namespace {

const char* kFullConfig = R"(# exercise every section
[model]
kind = two_layer
nx = 41
nz = 31
dx = 10
dz = 10
c_top = 1500
c_bottom = 2300
interface_z = 150

[acquisition]
sources = 100,20 300,20
receiver_line = 5 50 350 20
f_peak = 12
delay = 0.1
record_t = 0.4
band_lo = 3
band_hi = 30
amplitude = 2.5

[simulation]
npml = 12
pml_reflect = 1e-4

[objective]
kind = w2
beta = 2
floor_ratio = 0.01

[optimizer]
max_iters = 5
v_min = 1200
v_max = 3000

[output]
dir = results

[run]
seed = 77
)";

}  // namespace

TEST_CASE("a complete config parses with expansion and defaults", "[config]") {
    TempDir tmp;
    std::string p = tmp.write("full.cfg", kFullConfig);
    ExperimentConfig cfg = parse_config(p);

    REQUIRE(cfg.model.has_value());
    REQUIRE(cfg.model->kind == ModelKind::two_layer);
    REQUIRE(cfg.acquisition.has_value());
    REQUIRE(cfg.acquisition->sources.size() == 2);
    REQUIRE(cfg.acquisition->amplitude == 2.5);

    // receiver_line expands to an evenly spaced line with exact endpoints
    const auto& rec = cfg.acquisition->receivers;
    REQUIRE(rec.size() == 5);
    REQUIRE(rec.front().x == 50.0);
    REQUIRE(rec.back().x == 350.0);
    REQUIRE(rec[2].x == Catch::Approx(200.0));
    for (const Pos& r : rec) REQUIRE(r.z == 20.0);

    REQUIRE(cfg.sim.npml == 12);
    REQUIRE(cfg.sim.cfl_safety == 0.9);  // untouched default
    REQUIRE(cfg.objective->kind == MisfitKind::w2);
    REQUIRE(cfg.objective->floor_ratio == 0.01);
    REQUIRE(cfg.optimizer->max_iters == 5);
    REQUIRE(cfg.optimizer->stop_tol == 1e-5);
    REQUIRE(cfg.out_dir == "results");
    REQUIRE(cfg.seed == 77);

    // the acquisition builds against the model chosen dt divides record_t
    SlownessModel m = cfg.build_model();
    Acquisition acq = cfg.build_acquisition(m);
    REQUIRE(acq.receivers.size() == 5);
    REQUIRE(static_cast<double>(acq.n_steps()) * acq.dt_sim ==
            Catch::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("config errors carry the file path and line number", "[config]") {
    TempDir tmp;

    SECTION("unknown key") {
        std::string p = tmp.write("a.cfg",
                                  "[model]\n"
                                  "kind = homogeneous\n"
                                  "nx = 4\n"
                                  "nz = 4\n"
                                  "dx = 10\n"
                                  "dz = 10\n"
                                  "c = 1500\n"
                                  "colour = blue\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring(p + ":8: unknown key 'colour' in section [model]")));
    }

    SECTION("unknown section") {
        std::string p = tmp.write("b.cfg", "[model]\nkind = homogeneous\n\n[bogus]\nx = 1\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":4: unknown section [bogus]")));
    }

    SECTION("duplicate key") {
        std::string p = tmp.write("c.cfg", "[run]\nseed = 1\nseed = 2\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":3: duplicate key 'seed'")));
    }

    SECTION("duplicate section") {
        std::string p = tmp.write("d.cfg", "[run]\nseed = 1\n[run]\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":3: duplicate section [run]")));
    }

    SECTION("empty value") {
        std::string p = tmp.write("e.cfg", "[run]\nseed =\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring(":2: key 'seed' has an empty value")));
    }

    SECTION("key outside any section") {
        std::string p = tmp.write("f.cfg", "seed = 1\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":1: key outside of any section")));
    }

    SECTION("unterminated section header") {
        std::string p = tmp.write("g.cfg", "[run\nseed = 1\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":1: unterminated section header")));
    }

    SECTION("line that is neither assignment nor header") {
        std::string p = tmp.write("h.cfg", "[run]\nwhat is this\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(":2: expected key = value")));
    }

    SECTION("unparsable number names the key and line") {
        std::string p = tmp.write("i.cfg", "[geodesic]\nshift = fast\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring(":2: key 'shift': cannot parse 'fast' as a number")));
    }

    SECTION("missing required key points at the section header") {
        std::string p = tmp.write("j.cfg", "[freqscan]\nnt = 64\n[model]\nkind = homogeneous\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring("section [model] is missing required key 'nx'")));
    }
}

TEST_CASE("acquisition rules are enforced at parse time", "[config]") {
    TempDir tmp;
    auto with_acq = [&](const std::string& acq_lines) {
        return tmp.write("acq.cfg",
                         "[model]\n"
                         "kind = homogeneous\n"
                         "nx = 41\nnz = 31\ndx = 10\ndz = 10\nc = 1500\n"
                         "[acquisition]\n" +
                             acq_lines);
    };

    SECTION("receivers and receiver_line are mutually exclusive") {
        std::string p = with_acq(
            "sources = 100,20\nreceivers = 200,20\nreceiver_line = 3 0 400 20\nrecord_t = 0.4\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring("give receivers or receiver_line, not both")));
    }

    SECTION("malformed position") {
        std::string p = with_acq("sources = 100;20\nreceivers = 200,20\nrecord_t = 0.4\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("must look like x,z")));
    }

    SECTION("an unstable explicit dt is rejected before any simulation") {
        std::string p =
            with_acq("sources = 100,20\nreceivers = 200,20\nrecord_t = 0.4\ndt = 0.01\n");
        REQUIRE_THROWS_AS(parse_config(p), validation_error);
    }

    SECTION("record_t must be a whole number of steps") {
        std::string p =
            with_acq("sources = 100,20\nreceivers = 200,20\nrecord_t = 0.4\ndt = 0.0003\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(
                ContainsSubstring("record_t must be a whole number of time steps")));
    }

    SECTION("geometry outside the grid is rejected") {
        std::string p = with_acq("sources = 100,20\nreceivers = 9999,20\nrecord_t = 0.4\n");
        REQUIRE_THROWS_AS(parse_config(p), validation_error);
    }
}

TEST_CASE("model files referenced by configs resolve against the config directory",
          "[config]") {
    TempDir tmp;
    SlownessModel m = homogeneous_model(21, 16, 10.0, 10.0, 1800.0);
    write_model(tmp.path("truth.bin"), m);

    std::string cfg_text =
        "[model]\n"
        "kind = file\n"
        "path = truth.bin\n"
        "[acquisition]\n"
        "sources = 50,20\n"
        "receivers = 150,20\n"
        "record_t = 0.2\n";
    std::string p = tmp.write("file_model.cfg", cfg_text);
    ExperimentConfig cfg = parse_config(p);
    SlownessModel back = cfg.build_model();
    REQUIRE(back.nx == 21);
    REQUIRE(back.m == m.m);

    // a missing model file fails at parse time and names the resolved path
    std::string q = tmp.write("missing_model.cfg",
                              "[model]\nkind = file\npath = absent.bin\n"
                              "[acquisition]\nsources = 50,20\nreceivers = 150,20\n"
                              "record_t = 0.2\n");
    REQUIRE_THROWS_MATCHES(
        parse_config(q), validation_error,
        Catch::Matchers::MessageMatches(ContainsSubstring("absent.bin: cannot open file")));
}

TEST_CASE("optimizer and objective validation", "[config]") {
    TempDir tmp;

    SECTION("velocity envelope") {
        std::string p = tmp.write("opt.cfg", "[optimizer]\nv_min = 900\nv_max = 3000\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring(
                "velocity bounds must satisfy 1000 <= v_min < v_max <= 6000")));
    }

    SECTION("initial = file requires a path") {
        std::string p = tmp.write("opt2.cfg", "[optimizer]\ninitial = file\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("required when initial = file")));
    }

    SECTION("objective kind and parameters") {
        std::string p = tmp.write("obj.cfg", "[objective]\nkind = w1\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("must be l2 or w2")));

        std::string q = tmp.write("obj2.cfg", "[objective]\nfloor_ratio = 1.0\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(q), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("must lie in [0, 1)")));
    }

    SECTION("negative seed") {
        std::string p = tmp.write("run.cfg", "[run]\nseed = -3\n");
        REQUIRE_THROWS_MATCHES(
            parse_config(p), validation_error,
            Catch::Matchers::MessageMatches(ContainsSubstring("seed must be >= 0")));
    }
}

TEST_CASE("comments, blank lines, and spacing are tolerated", "[config]") {
    TempDir tmp;
    std::string p = tmp.write("style.cfg",
                              "\n"
                              "  # leading comment\n"
                              "[ run ]   # section with inner spaces\n"
                              "   seed   =    42   # trailing comment\n"
                              "\n");
    ExperimentConfig cfg = parse_config(p);
    REQUIRE(cfg.seed == 42);
}
