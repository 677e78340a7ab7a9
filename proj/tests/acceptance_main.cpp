#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "loadid/acceptance.hpp"

// Runs every acceptance criterion at its stated tolerance; one line each.
int main(int argc, char** argv) {
    std::string scratch = (std::filesystem::temp_directory_path() / "loadid_acceptance").string();
    std::string config_path;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--scratch" && i + 1 < argc) {
            scratch = argv[++i];
        } else if (a == "--config" && i + 1 < argc) {
            config_path = argv[++i];
        } else {
            only.push_back(std::stoi(a));
        }
    }
    const loadid::cfg::ExperimentConfig config =
        config_path.empty() ? loadid::cfg::ExperimentConfig() : loadid::cfg::load_config(config_path);
    int failed = 0;
    for (const auto& r : loadid::accept::run_all(config, scratch, only)) {
        std::cout << loadid::accept::format_line(r) << std::endl;
        failed += !r.pass;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
    return failed ? 1 : 0;
}
