#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadid/config.hpp"

namespace loadid::accept {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

CriterionResult equilibrium_hold(const cfg::ExperimentConfig& c);
CriterionResult linearization_fidelity(const cfg::ExperimentConfig& c);
CriterionResult closed_loop_pitfall(const cfg::ExperimentConfig& c);
CriterionResult diagnostics_verdicts(const cfg::ExperimentConfig& c);
CriterionResult riccati_predictor(const cfg::ExperimentConfig& c);
CriterionResult discretization(const cfg::ExperimentConfig& c);
// Criteria 7-9 share one 10-seed sweep.
std::vector<CriterionResult> seed_sweep(const cfg::ExperimentConfig& c, std::uint64_t first = 1, int count = 10);
CriterionResult fit_comparison(const cfg::ExperimentConfig& c);
CriterionResult bias_bound_sanity(std::uint64_t seed = 11);
CriterionResult determinism(const cfg::ExperimentConfig& c, const std::string& scratch_dir);

// Scalar closed loop y = G0 u + H0 e with innovation feedback, identified by
// FIR least squares under a fixed noise model H* = 1; exposed for unit tests.
struct ScalarLoopBias {
    Eigen::VectorXd freq_hz;
    Eigen::VectorXd coherence;  // |Phi_ur|^2 / (Phi_u Phi_r)
    Eigen::VectorXd empirical;  // |G_theta - G0|
    Eigen::VectorXd bound;
};
ScalarLoopBias scalar_loop_bias(std::uint64_t seed, int samples = 100000);

// Runs the selected criteria (all when `only` is empty), in order.
std::vector<CriterionResult> run_all(const cfg::ExperimentConfig& c, const std::string& scratch_dir,
                                     const std::vector<int>& only = {});
std::string format_line(const CriterionResult& r);

}  // namespace loadid::accept
