#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadid/grid.hpp"
#include "loadid/load_model.hpp"

namespace loadid::sim {

struct NoiseWindow {
    double variance = 0.0;  // per-sample variance at the Ts grid
    double start = 0.0;
    double end = 0.0;
    std::uint64_t seed = 1;

    bool active_at(double t) const;
};

struct Scenario {
    double duration = 5.0;
    double dt = 0.002;
    double ts = 0.01;
    NoiseWindow internal;                  // motor mechanical torque
    std::optional<int> external_bus;       // current-injection bus id
    NoiseWindow external;
    double measurement_variance = 0.0;     // added to V, theta, P, Q samples
    std::uint64_t measurement_seed = 7;

    int substeps() const;
    int sample_count() const;  // inclusive endpoints
    void validate() const;
};

struct MeasurementSeries {
    enum Column { V = 0, Theta, P, Q, Vx, Vy, Ix, Iy };
    static constexpr int kColumns = 8;
    static constexpr std::array<const char*, kColumns> kNames = {"V", "theta", "P", "Q", "Vx", "Vy", "Ix", "Iy"};

    double ts = 0.01;
    Eigen::VectorXd time;
    Eigen::MatrixXd values;  // rows = samples, cols = kColumns
    bool detrended = false;
    Eigen::VectorXd means = Eigen::VectorXd::Zero(kColumns);

    int rows() const { return static_cast<int>(time.size()); }
    Eigen::VectorXd column(Column c) const { return values.col(c); }
    // u = [dV, dtheta], y = [dP, dQ]
    Eigen::MatrixXd inputs() const;
    Eigen::MatrixXd outputs() const;
    // Rectangular load-bus voltage/current, columns (Vx, Vy) and (Ix, Iy).
    Eigen::MatrixXd rect_voltage() const;
    Eigen::MatrixXd rect_current() const;
    // Samples with t0 - eps <= t < t1 - eps.
    MeasurementSeries window(double t0, double t1) const;
    void validate() const;
};

MeasurementSeries detrend(const MeasurementSeries& s);

// Root-mean-square of (a - ref) over RMS of ref.
double nrmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref);

// Classical generators + network + third-order motor with static part.
// State order: delta[0..ng), omega[0..ng), E'x, E'y, s (system frame).
// Disturbances: xi_i adds to motor mechanical torque; xi_h is a current
// injection along the equilibrium voltage direction of one bus.
class DynamicSystem {
public:
    struct Linearization {
        Eigen::MatrixXd A, B, C, D;
    };

    DynamicSystem() = default;
    DynamicSystem(const grid::NetworkCase& c, const grid::PowerFlowSolution& pf, const LoadParameters& motor,
                  Complex y_static, int motor_bus_index);

    int state_count() const { return 2 * ng_ + 3; }
    int generator_count() const { return ng_; }
    int bus_count() const { return static_cast<int>(minv_.rows()); }
    int motor_bus_index() const { return motor_bus_; }
    double ws() const { return ws_; }
    const LoadParameters& motor() const { return motor_; }
    Complex static_admittance() const { return y_static_; }
    const Eigen::MatrixXcd& network_inverse() const { return minv_; }
    const std::vector<int>& generator_buses() const { return gen_bus_; }
    const Eigen::VectorXd& generator_emf() const { return e_gen_; }
    const Eigen::VectorXd& generator_angles0() const { return delta0_; }
    const Eigen::VectorXd& generator_xdp() const { return xdp_; }
    const Eigen::VectorXd& generator_tj() const { return tj_; }
    const Eigen::VectorXd& generator_damping() const { return damping_; }
    const Eigen::VectorXd& mechanical_power() const { return pm_; }
    double mechanical_torque() const { return tm_; }

    // Fixes Pm and Tm so that x is an equilibrium.
    void set_operating_inputs(const Eigen::VectorXd& x);

    Eigen::VectorXcd bus_voltages(const Eigen::VectorXd& x, int inj_bus, double xi_h) const;
    Eigen::VectorXd rhs(const Eigen::VectorXd& x, double xi_i, int inj_bus, double xi_h) const;
    // MeasurementSeries column order.
    Eigen::VectorXd outputs(const Eigen::VectorXd& x, int inj_bus, double xi_h) const;
    // Analytic Jacobians at x; inputs (xi_i, xi_h). inj_bus < 0 leaves xi_h's column zero.
    Linearization jacobian(const Eigen::VectorXd& x, int inj_bus, double xi_h) const;
    Complex injection_direction(int bus_index) const;

private:
    int ng_ = 0;
    int motor_bus_ = -1;
    double ws_ = 0.0;
    std::vector<int> gen_bus_;
    Eigen::VectorXd e_gen_, delta0_, xdp_, tj_, damping_, pm_;
    LoadParameters motor_;
    double tm_ = 0.0;
    Complex y_static_;
    Eigen::MatrixXcd minv_;
    Eigen::VectorXcd v_eq_;
};

struct SystemEquilibrium {
    grid::NetworkCase network;
    grid::PowerFlowSolution pf;
    DynamicSystem system;
    Eigen::VectorXd x0;
    Eigen::VectorXcd bus_voltage;
    int motor_bus_id = 0;
    LoadParameters load;   // true load parameters in the load-bus frame
    double residual = 0.0; // max |dx/dt| at x0

    Eigen::VectorXd outputs0() const;
};

// Motor reactances, time constants and inertia are taken from `motor_spec`.
SystemEquilibrium init_equilibrium(const grid::NetworkCase& c, const grid::PowerFlowSolution& pf,
                                   const LoadParameters& motor_spec);

struct SimulationRecord {
    MeasurementSeries series;
    Eigen::MatrixXd disturbance;  // per substep (xi_i, xi_h), substeps + 1 rows
};

SimulationRecord simulate_detailed(const SystemEquilibrium& eq, const Scenario& sc);
MeasurementSeries simulate(const SystemEquilibrium& eq, const Scenario& sc);
// Substep disturbance sequence for the scenario (same draws as simulate).
Eigen::MatrixXd realize_disturbance(const Scenario& sc);

struct LinearSystem {
    Eigen::MatrixXd A, B, C, D;
    std::vector<std::string> states;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

LinearSystem linearize_system(const SystemEquilibrium& eq, std::optional<int> injection_bus = std::nullopt);

// Exact ZOH propagation from zero state: d holds one row per step of length
// dt; returns C x(k) + D d(k) for every `decimation`-th row.
Eigen::MatrixXd simulate_linear(const LinearSystem& ss, const Eigen::MatrixXd& d, double dt, int decimation = 1);

// Wraps linear output deltas in a series on the sample grid.
MeasurementSeries linear_series(const Eigen::MatrixXd& y, double ts, const Eigen::VectorXd& offset);

// Eigenvalues of A sorted by (real, imag).
Eigen::VectorXcd eigenvalues(const LinearSystem& ss);

}  // namespace loadid::sim
