#pragma once

#include <string>

#include <Eigen/Dense>

#include "loadid/load_model.hpp"

namespace loadid::pem {

using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat2 = Eigen::Matrix2d;

enum class NoiseChannel { Torque, EmfWrong, Custom };

NoiseChannel parse_channel(const std::string& s);
const char* channel_name(NoiseChannel c);

// Covariances of the internal disturbance e0 (Q), measurement noise (R) and
// their cross term (N), plus the channel pattern for G and H.
struct NoiseConfig {
    NoiseChannel channel = NoiseChannel::Torque;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(1, 1, 0.002);
    Mat2 R = 1e-8 * Mat2::Identity();
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(1, 2);
    Eigen::MatrixXd G_custom;  // 3 x m, used by Custom
    Eigen::MatrixXd H_custom;  // 2 x m, used by Custom

    static NoiseConfig make(NoiseChannel ch, double q = 0.002, double r = 1e-8);
    int dim() const { return static_cast<int>(Q.rows()); }
    void validate() const;
};

// States (dE'x, dE'y, ds), inputs (dV, dtheta), outputs (dP, dQ).
struct GreyBoxContinuous {
    Mat3 A;
    Mat32 B;
    Mat23 C;
    Mat2 D;
    Eigen::MatrixXd G;
    Eigen::MatrixXd H;
};

struct GreyBoxDiscrete {
    Mat3 Ad;
    Mat32 Bd;
    Mat23 Cd;
    Mat2 Dd;
    Eigen::MatrixXd Gd;
    Eigen::MatrixXd Hd;
    double ts = 0.0;
};

struct InnovationPredictor {
    Mat32 Kd = Mat32::Zero();
    Mat3 P = Mat3::Zero();
    Mat3 F = Mat3::Zero();    // Ad - Kd Cd
    Mat32 Bp = Mat32::Zero(); // Bd - Kd Dd
    Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
    double residual = 0.0;         // symmetric-form Riccati residual
    double printed_residual = 0.0; // residual of P = Ad P Ad' - Kd(Ad P Cd' + Nbar)' + Gd Q Gd'
    double spectral_radius = 0.0;
    int iterations = 0;
};

GreyBoxContinuous assemble_continuous(const LoadParameters& p, const NoiseConfig& noise);

GreyBoxDiscrete discretize_zoh(const GreyBoxContinuous& c, double ts);

// Stabilizing DARE solution by structure-preserving doubling.
InnovationPredictor solve_dare(const GreyBoxDiscrete& d, const NoiseConfig& noise);

// Kd = 0: the predictor is the deterministic simulation of the model.
InnovationPredictor open_loop_predictor(const GreyBoxDiscrete& d);

// One application of the Riccati map, used for fixed-point checks.
Mat3 riccati_map(const Mat3& P, const GreyBoxDiscrete& d, const NoiseConfig& noise);

double spectral_radius(const Mat3& m);

struct Prediction {
    Eigen::MatrixXd yhat;  // N x 2
    Eigen::MatrixXd eps;   // N x 2
};

// x(k+1) = F x(k) + Bp u(k) + Kd y(k); yhat(k) = Cd x(k) + Dd u(k).
Prediction predict(const InnovationPredictor& pred, const GreyBoxDiscrete& d, const Eigen::MatrixXd& u,
                   const Eigen::MatrixXd& y);

// Mean squared two-norm of the rows of eps from `burn_in` on.
double loss(const Eigen::MatrixXd& eps, int burn_in = 0);

}  // namespace loadid::pem
