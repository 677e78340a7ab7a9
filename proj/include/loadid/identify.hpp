#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadid/greybox.hpp"
#include "loadid/smallsig.hpp"

namespace loadid::pem {

struct ParameterBounds {
    LoadParameters lower;
    LoadParameters upper;

    // x/÷ scale around init (sign preserved), slip in (1e-4, 0.5); parameters
    // with zero init get [-1, 1].
    static ParameterBounds around(const LoadParameters& init, double scale = 10.0);
};

struct IdentOptions {
    std::vector<std::string> free = {"X", "Xp", "Td0p", "Tj", "s0", "Exp0", "Eyp0"};
    int burn_in = 50;
    int restarts = 8;              // extra starts, used only when a start fails
    std::uint64_t restart_seed = 1;
    int max_iterations = 200;
    double rel_step = 1e-6;
    std::string label;
};

struct IdentResult {
    std::string label;
    std::string method;  // "pem" or "output-error"
    NoiseChannel channel = NoiseChannel::Torque;
    LoadParameters estimate;
    LoadParameters initial;
    double loss = 0.0;
    double initial_loss = 0.0;
    std::vector<double> trace;
    Eigen::Vector2d fit = Eigen::Vector2d::Zero();  // percent, per output channel
    bool converged = false;
    std::string status;
    std::vector<std::string> at_bound;
    std::vector<std::string> restart_log;
    int start_index = 0;
    int evaluations = 0;
};

// Loss-ready record: detrended u = [dV, dtheta], y = [dP, dQ] and V0.
struct IdentData {
    Eigen::MatrixXd u;
    Eigen::MatrixXd y;
    double v0 = 1.0;
    double ts = 0.01;

    static IdentData from_series(const sim::MeasurementSeries& detrended);
};

// Operating point from the data: V0 = mean V, theta0 = 0.
LoadParameters with_operating_point(LoadParameters p, const IdentData& d);

// Kalman predictor for p (or the open-loop predictor when output_error).
Prediction evaluate_predictor(const LoadParameters& p, const NoiseConfig& noise, const IdentData& d,
                              bool output_error);

// Deterministic model response to the recorded input (Kd = 0).
Eigen::MatrixXd simulate_model(const LoadParameters& p, const IdentData& d);

// 100 (1 - ||y - yhat|| / ||y - mean(y)||) per column, from `burn_in` on.
Eigen::Vector2d fit_percent(const Eigen::MatrixXd& y, const Eigen::MatrixXd& yhat, int burn_in = 0);

IdentResult identify(const IdentData& data, const LoadParameters& init, const ParameterBounds& bounds,
                     const NoiseConfig& noise, const IdentOptions& opt = {});

IdentResult identify_output_error(const IdentData& data, const LoadParameters& init, const ParameterBounds& bounds,
                                  const IdentOptions& opt = {});

}  // namespace loadid::pem
