#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loadid/closed_loop.hpp"
#include "loadid/config.hpp"
#include "loadid/identify.hpp"
#include "loadid/smallsig.hpp"
#include "loadid/spectral.hpp"

namespace loadid::app {

// Case, power flow and equilibrium described by a config.
sim::SystemEquilibrium build_equilibrium(const cfg::ExperimentConfig& c);

// Detrended analysis window of a raw record.
sim::MeasurementSeries analysis_window(const cfg::ExperimentConfig& c, const sim::MeasurementSeries& raw);

std::string equilibrium_report(const sim::SystemEquilibrium& eq);

struct DiagnosticsResult {
    diag::PEReport pe;
    diag::InformativenessReport info;
    std::optional<loop::PitfallReport> pitfall;
    std::string pitfall_error;
    std::string verdict;  // one-page text
};

DiagnosticsResult run_diagnostics(const cfg::ExperimentConfig& c, const sim::SystemEquilibrium& eq,
                                  const sim::MeasurementSeries& window);

// Initial guess for identification.
LoadParameters initial_guess(const cfg::ExperimentConfig& c, const LoadParameters& truth);

pem::IdentResult run_method(const cfg::ExperimentConfig& c, cfg::Method m, const pem::IdentData& data,
                            const LoadParameters& init);

// PEM loss on a held-out record with the method's own noise model.
double validation_loss(const cfg::ExperimentConfig& c, cfg::Method m, const LoadParameters& p,
                       const pem::IdentData& held_out);

struct MethodOutcome {
    cfg::Method method = cfg::Method::PemA;
    pem::IdentResult result;
    double validation_loss = 0.0;
    Eigen::MatrixXd simulated;         // deterministic model response, N x 2
    Eigen::Vector2d fit_truth = Eigen::Vector2d::Zero();  // vs the true load's deterministic response
};

// Full simulate -> identify protocol for one seed.
struct Study {
    cfg::ExperimentConfig config;
    sim::SystemEquilibrium eq;
    sim::MeasurementSeries raw;
    sim::MeasurementSeries window;
    pem::IdentData data;
    pem::IdentData held_out;
    LoadParameters truth;
    LoadParameters init;
    Eigen::MatrixXd truth_response;  // true load driven by the recorded inputs
    std::vector<MethodOutcome> outcomes;

    const MethodOutcome& outcome(cfg::Method m) const;
};

Study run_study(const cfg::ExperimentConfig& c, const std::vector<cfg::Method>& methods);

// Recovery envelope for the torque-channel estimate (relative errors).
struct RecoveryCheck {
    bool pass = false;
    std::string detail;
};
RecoveryCheck pem_a_recovery(const LoadParameters& est, const LoadParameters& truth);
bool pem_b_degraded(const Study& s);
bool tm_degraded(const Study& s);

// Command implementations; each writes into out_dir and returns a summary line.
std::string cmd_simulate(const cfg::ExperimentConfig& c, const std::string& out_dir);
std::string cmd_diagnose(const cfg::ExperimentConfig& c, const std::string& series_path, const std::string& out_dir);
std::string cmd_identify(const cfg::ExperimentConfig& c, const std::string& series_path, cfg::Method m,
                         const std::string& out_dir);
std::string cmd_reproduce(const cfg::ExperimentConfig& c, const std::string& out_dir);
// Seeds run in parallel into out_dir/seed_<n>; returns the aggregate summary.
std::string cmd_reproduce_batch(const cfg::ExperimentConfig& c, std::uint64_t first, std::uint64_t last,
                                const std::string& out_dir);

}  // namespace loadid::app
