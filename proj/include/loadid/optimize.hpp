#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loadid::opt {

// Fills r with residuals at x; returns false when x cannot be evaluated.
using ResidualFn = std::function<bool(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct LmOptions {
    int max_iterations = 200;
    double rel_step = 1e-6;  // forward-difference step, relative
    double ftol = 1e-10;     // relative cost decrease on an accepted step
    double xtol = 1e-10;     // relative step length
    double gtol = 1e-14;     // projected gradient, relative to cost
    double lambda0 = 1e-3;
};

struct LmResult {
    Eigen::VectorXd x;
    double cost = 0.0;  // sum of squared residuals
    double initial_cost = 0.0;
    std::vector<double> trace;  // cost after each iteration
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string status;
};

// Box-constrained Levenberg-Marquardt with forward-difference Jacobians.
// Steps are projected onto [lower, upper]; the damping acts as a trust
// region. Throws IdentificationError when x0 cannot be evaluated.
LmResult minimize_bounded_lm(const ResidualFn& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt = {});

// Forward-difference Jacobian; falls back to a backward step at the upper
// bound or when the forward point fails. Returns false if a column fails.
bool fd_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double rel_step, Eigen::MatrixXd& jac,
                 int& evaluations);

}  // namespace loadid::opt
