#include <cstdlib>
#include <iostream>
#include <string>

#include "dtfl/errors.hpp"
#include "dtfl/experiment.hpp"

namespace {

void usage(std::ostream& out) {
    out << "usage:\n"
        << "  dtfl run --config <path> [--seed N] [--out DIR]\n"
        << "  dtfl print-defaults\n"
        << "  dtfl selftest\n"
        << "\n"
        << "DTFL_THREADS caps how many runs execute in parallel (default 1).\n";
}

int thread_count() {
    const char* env = std::getenv("DTFL_THREADS");
    if (env == nullptr) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

int cmd_run(int argc, char** argv) {
    std::string config_path;
    std::string out_dir;
    bool has_seed = false;
    std::uint64_t seed = 0;
    for (int i = 0; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) config_path = argv[++i];
        else if (arg == "--seed" && i + 1 < argc) {
            seed = std::strtoull(argv[++i], nullptr, 10);
            has_seed = true;
        } else if (arg == "--out" && i + 1 < argc) out_dir = argv[++i];
        else {
            std::cerr << "unknown argument '" << arg << "'\n";
            return 1;
        }
    }
    if (config_path.empty()) {
        std::cerr << "run requires --config <path>\n";
        return 1;
    }
    dtfl::ExperimentSpec spec = dtfl::parse_config(config_path);
    if (has_seed) spec.scenario.seed = seed;
    if (!out_dir.empty()) spec.output_dir = out_dir;
    spec.validate();
    const auto summaries = dtfl::run_experiment(spec, thread_count());
    for (const std::string& path : summaries) std::cout << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage(std::cerr);
        return 1;
    }
    const std::string cmd = argv[1];
    try {
        if (cmd == "run") return cmd_run(argc - 2, argv + 2);
        if (cmd == "print-defaults") {
            dtfl::print_defaults(std::cout);
            return 0;
        }
        if (cmd == "selftest") {
            return dtfl::run_formula_selftest(std::cout) ? 0 : 2;
        }
        if (cmd == "--help" || cmd == "-h" || cmd == "help") {
            usage(std::cout);
            return 0;
        }
        std::cerr << "unknown command '" << cmd << "'\n";
        usage(std::cerr);
        return 1;
    } catch (const dtfl::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dtfl::UnknownKey& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dtfl::BadConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
