#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadid/frequency.hpp"

namespace loadid::diag {

enum class Window { Hann, Rectangular };
// Applied to every segment before windowing.
enum class SegmentDetrend { None, Constant, Linear };

// Two-sided density: white noise of variance s2 gives s2 * ts / (2 pi).
struct SpectrumEstimate {
    Eigen::VectorXd omega;  // rad/s, bins 0..L/2
    std::vector<Eigen::MatrixXcd> S;
    int segment = 0;
    int overlap = 0;
    int averages = 0;
    Window window = Window::Hann;
    SegmentDetrend detrend = SegmentDetrend::Constant;
    double ts = 0.0;

    int size() const { return static_cast<int>(omega.size()); }
    // Sub-block [r0, r0+nr) x [c0, c0+nc) of every bin.
    std::vector<Eigen::MatrixXcd> block(int r0, int nr, int c0, int nc) const;
};

// Averaged modified periodogram of the columns of x (N x m).
SpectrumEstimate estimate_spectrum(const Eigen::MatrixXd& x, double ts, int segment = 256, int overlap = -1,
                                   Window window = Window::Hann,
                                   SegmentDetrend detrend = SegmentDetrend::Constant);

struct InformativenessReport {
    Eigen::VectorXd freq_hz;
    Eigen::VectorXd ratio;  // min/max eigenvalue, negative eigenvalues clipped to 0
    double floor = 1e-6;
    double min_ratio = 0.0;
    bool informative = false;
};

// Verdict over the bins with f_lo <= f <= f_hi.
InformativenessReport informativeness_test(const SpectrumEstimate& z, double f_lo_hz, double f_hi_hz,
                                           double eig_ratio_floor = 1e-6);

struct PEReport {
    std::vector<int> orders;
    std::vector<double> condition;
    std::vector<double> log10_det;
    int verified_order = 0;
    double threshold = 1e-10;
};

// Block-Toeplitz autocovariance test for orders 1..n_max.
PEReport persistent_excitation_order(const Eigen::MatrixXd& u, int n_max, double threshold = 1e-10);

// sigma_max(H0 - Htheta) * sqrt(sigma_max(L0) / sigma_min(Phi_u)) * sqrt(sigma_max(Phi_u^e) / sigma_min(Phi_u)).
// lambda0 is in the spectral convention of Phi_u.
Eigen::VectorXd bias_bound(const FrequencyResponse& h0, const FrequencyResponse& htheta,
                           const Eigen::MatrixXcd& lambda0, const std::vector<Eigen::MatrixXcd>& phi_u,
                           const std::vector<Eigen::MatrixXcd>& phi_ue);

// Phi_e^r = Lambda0 - Phi_eu Phi_u^-1 Phi_ue (Schur complement).
Eigen::MatrixXcd residual_noise_spectrum(const Eigen::MatrixXcd& lambda0, const Eigen::MatrixXcd& phi_eu,
                                         const Eigen::MatrixXcd& phi_u);

double max_singular_value(const Eigen::MatrixXcd& m);
double min_singular_value(const Eigen::MatrixXcd& m);

}  // namespace loadid::diag
