#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "loadid/acceptance.hpp"
#include "loadid/error.hpp"
#include "loadid/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kSimulation = 3, kIdentification = 4, kAcceptance = 5 };

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& s) {
    const auto dots = s.find("..");
    if (dots == std::string::npos) throw loadid::ConfigError("--seeds expects N..M, got '" + s + "'");
    try {
        return {std::stoull(s.substr(0, dots)), std::stoull(s.substr(dots + 2))};
    } catch (const std::exception&) {
        throw loadid::ConfigError("--seeds expects N..M, got '" + s + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    using namespace loadid;
    CLI::App app{"Measurement-based load identification toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "experiment config file (defaults built in)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--seed", seed, "derive every seed from N (overrides the config)");

    auto* simulate = app.add_subcommand("simulate", "simulate the scenario; writes series CSV and equilibrium report");

    std::string series;
    auto* diagnose = app.add_subcommand("diagnose", "excitation, informativeness and closed-loop checks on a series");
    diagnose->add_option("--series", series, "series CSV")->required();

    std::string method = "pem-a";
    auto* identify = app.add_subcommand("identify", "identify the load model from a series");
    identify->add_option("--series", series, "series CSV")->required();
    identify->add_option("--method", method, "pem-a | pem-b | tm")
        ->check(CLI::IsMember({"pem-a", "pem-b", "tm"}));

    std::string seeds;
    auto* reproduce = app.add_subcommand("reproduce", "simulate, diagnose and run all three methods");
    reproduce->add_option("--seeds", seeds, "batch over seeds N..M in parallel");

    std::vector<int> only;
    std::string scratch;
    auto* check = app.add_subcommand("check", "run the acceptance criteria");
    check->add_option("--only", only, "criterion ids to run")->delimiter(',');
    check->add_option("--scratch", scratch, "scratch directory for the determinism check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        cfg::ExperimentConfig c = config_path.empty() ? cfg::ExperimentConfig() : cfg::load_config(config_path);
        if (seed) c = c.with_seed(*seed);
        if (!out_dir.empty()) c.out_dir = out_dir;
        c.validate();

        if (*simulate) {
            std::cout << app::cmd_simulate(c, c.out_dir) << "\n";
        } else if (*diagnose) {
            std::cout << app::cmd_diagnose(c, series, c.out_dir);
        } else if (*identify) {
            std::cout << app::cmd_identify(c, series, cfg::parse_method(method), c.out_dir);
        } else if (*reproduce) {
            if (seeds.empty()) {
                std::cout << app::cmd_reproduce(c, c.out_dir);
            } else {
                const auto [first, last] = parse_range(seeds);
                std::cout << app::cmd_reproduce_batch(c, first, last, c.out_dir);
            }
        } else if (*check) {
            if (scratch.empty()) scratch = (std::filesystem::path(c.out_dir) / "check").string();
            bool ok = true;
            for (const auto& r : accept::run_all(c, scratch, only)) {
                std::cout << accept::format_line(r) << std::endl;
                ok = ok && r.pass;
            }
            return ok ? kOk : kAcceptance;
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfig;
    } catch (const IdentificationError& e) {
        std::cerr << "identification error: " << e.what() << "\n";
        return kIdentification;
    } catch (const ConvergenceError& e) {
        std::cerr << "identification error: " << e.what() << "\n";
        return kIdentification;
    } catch (const Error& e) {
        std::cerr << e.kind() << " error: " << e.what() << "\n";
        return kSimulation;
    }
}
