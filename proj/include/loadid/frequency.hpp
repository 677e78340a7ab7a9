#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loadid {

// Complex matrix function sampled on an ascending grid of rad/s.
struct FrequencyResponse {
    Eigen::VectorXd omega;
    std::vector<Eigen::MatrixXcd> values;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    int size() const { return static_cast<int>(omega.size()); }
    // Throws ValidationError when the grid is not ascending or values are not finite.
    void validate() const;
};

// Logarithmic grid in rad/s between f_lo and f_hi (Hz).
Eigen::VectorXd log_grid(double f_lo_hz = 0.01, double f_hi_hz = 10.0, int points = 200);

bool same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel_tol = 1e-9);

}  // namespace loadid
