#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "loadid/frequency.hpp"
#include "loadid/greybox.hpp"
#include "loadid/smallsig.hpp"
#include "loadid/spectral.hpp"

namespace loadid::loop {

// Linearized classical generator: states (d delta, d omega), inputs and
// outputs are rectangular terminal voltage and injected current deltas.
struct GeneratorModel {
    Eigen::Matrix2d A, B, C, D;
};

// emf and bus voltage are equilibrium phasors in the system frame.
GeneratorModel generator_model(Complex emf, Complex bus_voltage, double xdp, double tj, double damping, double ws);
Eigen::Matrix2cd generator_frf(const GeneratorModel& g, double omega);

// Network seen from the load bus with generators substituted:
// dI_L = K dV_L + K_h xi_h, where dI_L is the current drawn by the load.
struct NetworkReduction {
    FrequencyResponse K;
    std::optional<FrequencyResponse> Kh;
};

// Real-expanded (2n x 2n) frequency-domain network matrix at omega, load bus
// excluded from folding; Ybar dV = -e_L dI_L + b xi_h.
Eigen::MatrixXcd expanded_network(const sim::SystemEquilibrium& eq, double omega);
// Real-expanded injection direction of a unit xi_h at bus `bus_id`.
Eigen::VectorXd injection_vector(const sim::SystemEquilibrium& eq, int bus_id);

NetworkReduction reduce_to_load(const sim::SystemEquilibrium& eq, const Eigen::VectorXd& omega,
                                std::optional<int> disturbance_bus = std::nullopt);

// Voltage-to-current FRF of the load in rectangular coordinates of the frame
// of `p` (use eq.load.rotated(theta) for the system frame). With
// include_motor = false only the constant-impedance part remains.
FrequencyResponse load_frf(const LoadParameters& p, const Eigen::VectorXd& omega, bool include_motor = true);
// Internal-disturbance-to-current FRF (2 x m) for a noise channel.
FrequencyResponse load_noise_frf(const LoadParameters& p, const pem::NoiseConfig& noise, const Eigen::VectorXd& omega);

// Effective dV -> dI relation Phi_IV Phi_V^+ of the closed loop under scalar
// disturbance spectra; exactly G when phi_i = 0 and exactly K when phi_h = 0.
FrequencyResponse closed_loop_response(const FrequencyResponse& K, const FrequencyResponse& Kh,
                                       const FrequencyResponse& G, const FrequencyResponse& Hi,
                                       const Eigen::VectorXd& phi_i, const Eigen::VectorXd& phi_h);

struct Superposition {
    Eigen::MatrixXd v_i, i_i;  // response to xi_i alone, N x 2 rectangular
    Eigen::MatrixXd v_h, i_h;  // response to xi_h alone
};

// ss must have inputs (xi_i, xi_h) and outputs in MeasurementSeries order.
Superposition superposition_decompose(const sim::LinearSystem& ss, const Eigen::VectorXd& xi_i,
                                      const Eigen::VectorXd& xi_h, double dt, int decimation = 1);

// Continuous state-space realization.
struct StateSpace {
    Eigen::MatrixXd A, B, C, D;
};

// K(s) realized with generator states; input (dVx, dVy), output (dIx, dIy).
StateSpace network_state_space(const sim::SystemEquilibrium& eq);
// G(s) of the load in rectangular coordinates of the frame of `p`.
StateSpace load_state_space(const LoadParameters& p);
Eigen::MatrixXcd frequency_response(const StateSpace& ss, double omega);
// Zero initial state, input linear between samples (first-order hold).
Eigen::MatrixXd simulate_foh(const StateSpace& ss, const Eigen::MatrixXd& u, double ts);

struct PitfallReport {
    Eigen::VectorXd freq_hz;
    Eigen::VectorXd coherence;   // mean multiple coherence of dI on dV
    Eigen::VectorXd resid_k;     // tr Phi(dI - K*dV) / tr Phi(dI)
    Eigen::VectorXd resid_g;     // tr Phi(dI - G*dV) / tr Phi(dI)
    double nrmse = 0.0;          // coherence-weighted NRMSE of dI - K*dV
    double time_nrmse = 0.0;     // plain NRMSE of the same residual
    int high_coherence_bins = 0;
    int closer_to_k = 0;
    double coherence_threshold = 0.95;
    bool k_explains = false;     // nrmse < threshold and every high-coherence bin closer to K
    std::string regime;          // "feedback-dominant" or "feedforward-dominant"
    Eigen::MatrixXd current;     // dI about the equilibrium, N x 2
    Eigen::MatrixXd k_filtered;  // K * dV
    Eigen::MatrixXd g_filtered;  // G * dV
};

// Checks whether the record obeys dI = K dV (feedback) rather than
// dI = G dV. Deviations are taken from the equilibrium and the record is
// assumed to start at rest.
PitfallReport validate_pitfall(const sim::SystemEquilibrium& eq, const sim::MeasurementSeries& s, int segment,
                               double nrmse_threshold = 0.15, double coherence_threshold = 0.95);

}  // namespace loadid::loop
