#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loadid::grid {

using Complex = std::complex<double>;

enum class BusType { Slack, PV, PQ };
enum class LoadKind { Impedance, Motor, Injection };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double v_set = 1.0;    // slack/PV voltage magnitude
    double p_gen = 0.0;    // PV scheduled generation
    double b_shunt = 0.0;  // shunt susceptance to ground
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;  // total line charging
};

struct Generator {
    int bus = 0;
    double tj = 0.0;   // inertia time constant 2H, s
    double xdp = 0.0;  // transient reactance
    double damping = 0.0;
};

struct Load {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    LoadKind kind = LoadKind::Impedance;
};

struct NetworkCase {
    double frequency_hz = 60.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    int size() const { return static_cast<int>(buses.size()); }
    // Internal index of a bus id; throws ValidationError when absent.
    int index_of(int bus_id) const;
    bool has_bus(int bus_id) const;
    int slack_index() const;
    // Total scheduled load at a bus (all kinds).
    Complex load_at(int bus_id) const;
    const Load* motor_load() const;
    void validate() const;
};

struct PowerFlowSolution {
    Eigen::VectorXd vm;
    Eigen::VectorXd va;
    Eigen::VectorXd p_inj;
    Eigen::VectorXd q_inj;
    int iterations = 0;
    double mismatch = 0.0;

    Eigen::VectorXcd voltage() const;
};

struct AdmittanceMatrix {
    Eigen::MatrixXcd y;
    std::vector<int> bus_ids;
    std::vector<int> folded_loads;

    int order() const { return static_cast<int>(y.rows()); }
};

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 30;
};

NetworkCase load_case(const std::string& text);
NetworkCase load_case_file(const std::string& path);
std::string format_case(const NetworkCase& c);

// 3-machine 9-bus case with an induction motor at bus 6.
const std::string& bundled_case_text();
NetworkCase bundled_case();

AdmittanceMatrix build_admittance(const NetworkCase& c, bool fold_constant_loads,
                                  std::optional<int> exclude_bus = std::nullopt,
                                  const PowerFlowSolution* pf = nullptr);

PowerFlowSolution solve_power_flow(const NetworkCase& c, const PowerFlowOptions& opt = {});

// Complex power injections S = V conj(Y V).
Eigen::VectorXcd power_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v);

Eigen::MatrixXd expand_real(const Eigen::MatrixXcd& y);
inline Eigen::MatrixXd expand_real(const AdmittanceMatrix& y) { return expand_real(y.y); }
// Stacked (re, im) per entry, matching expand_real's block layout.
Eigen::VectorXd stack_real(const Eigen::VectorXcd& v);
Eigen::VectorXcd unstack_real(const Eigen::VectorXd& v);

}  // namespace loadid::grid
