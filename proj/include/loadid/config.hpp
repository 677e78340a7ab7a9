#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loadid/load_model.hpp"
#include "loadid/smallsig.hpp"

namespace loadid::cfg {

// Flat "key = value" text; '#' starts a comment; keys use dotted sections.
struct KeyValues {
    std::map<std::string, std::string> entries;
    std::map<std::string, int> lines;

    static KeyValues parse(const std::string& text);
};

enum class InitMode { Truth, Perturbed, Explicit };
enum class Method { PemA, PemB, Tm };

Method parse_method(const std::string& s);
const char* method_name(Method m);   // pem-a, pem-b, tm
const char* method_label(Method m);  // PEM_A, PEM_B, TM

struct Diagnostics {
    double band_low_hz = 0.0;
    double band_high_hz = 10.0;
    int segment = 128;
    int overlap = 64;
    int pe_max_order = 60;
    double pe_threshold = 1e-10;
    double eig_floor = 1e-6;
    double pitfall_threshold = 0.15;
    double coherence = 0.95;
};

struct Identification {
    Method method = Method::PemA;
    double q = 0.002;
    double r = 1e-8;
    InitMode init_mode = InitMode::Perturbed;
    double perturbation = 0.3;
    std::uint64_t init_seed = 1;
    std::map<std::string, double> explicit_init;
    double bounds_scale = 10.0;
    int restarts = 8;
    std::uint64_t restart_seed = 1;
    std::vector<std::string> free = {"X", "Xp", "Td0p", "Tj", "s0", "Exp0", "Eyp0"};
    int burn_in = 50;
    int max_iterations = 200;
    std::uint64_t validation_seed = 5001;
};

struct ExperimentConfig {
    std::string case_file;  // empty: bundled case
    std::string out_dir = "out";
    std::string base_dir = ".";  // relative paths resolve against it
    sim::Scenario scenario;
    double analysis_start = 1.5;
    double analysis_end = 5.0;
    LoadParameters motor;  // X, Xp, Td0p, Tj of the simulated motor
    Diagnostics diagnostics;
    Identification ident;

    ExperimentConfig();
    // Derives every seed from one number.
    ExperimentConfig with_seed(std::uint64_t seed) const;
    std::string resolved_case_path() const;
    // Throws ConfigError.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
// Canonical text; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& c);

}  // namespace loadid::cfg
