#include <cstdlib>
#include <iostream>
#include <string>

#include "otfwi/config.hpp"
#include "otfwi/experiments.hpp"

namespace {

constexpr const char* usage =
    "usage: otfwi <forward|invert|landscape|geodesic|gradcheck|freqscan>\n"
    "             --config <path> [--seed N] [--out DIR]\n"
    "\n"
    "exit codes: 0 success, 1 invalid input, 2 numerical failure\n";

int fail_usage(const std::string& msg) {
    std::cerr << "otfwi: " << msg << "\n" << usage;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace otfwi;
    if (argc < 2) return fail_usage("missing command");
    std::string command = argv[1];
    std::string config_path, out_dir;
    uint64_t seed = 0;
    bool have_seed = false;

    for (int i = 2; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" || a == "--seed" || a == "--out") {
            if (i + 1 >= argc) return fail_usage(a + " needs a value");
            std::string v = argv[++i];
            if (a == "--config") {
                config_path = v;
            } else if (a == "--out") {
                out_dir = v;
            } else {
                char* end = nullptr;
                long long s = std::strtoll(v.c_str(), &end, 10);
                if (end == v.c_str() || *end != '\0' || s < 0)
                    return fail_usage("--seed needs a nonnegative integer, got '" + v + "'");
                seed = static_cast<uint64_t>(s);
                have_seed = true;
            }
        } else {
            return fail_usage("unknown argument '" + a + "'");
        }
    }
    if (config_path.empty()) return fail_usage("--config is required");

    try {
        ExperimentConfig cfg = parse_config(config_path);
        if (have_seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        if (command == "forward") cmd_forward(cfg, std::cout);
        else if (command == "invert") cmd_invert(cfg, std::cout);
        else if (command == "landscape") cmd_landscape(cfg, std::cout);
        else if (command == "geodesic") cmd_geodesic(cfg, std::cout);
        else if (command == "gradcheck") cmd_gradcheck(cfg, std::cout);
        else if (command == "freqscan") cmd_freqscan(cfg, std::cout);
        else return fail_usage("unknown command '" + command + "'");
    } catch (const validation_error& e) {
        std::cerr << "otfwi: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "otfwi: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
