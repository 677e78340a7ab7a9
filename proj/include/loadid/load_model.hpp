#pragma once

#include <array>
#include <complex>
#include <numbers>
#include <string>

namespace loadid {

using Complex = std::complex<double>;

// Third-order induction motor in parallel with a constant-impedance part.
// E' components and the operating angle are expressed in one common frame;
// identification uses the load-bus frame (theta0 = 0).
struct LoadParameters {
    double X = 3.679;
    double Xp = 0.296;
    double Td0p = 0.576;
    double Tj = 2.0;
    double s0 = 0.01;
    double Exp0 = 0.9014;
    double Eyp0 = -0.1911;
    double Pz = 0.0;
    double Qz = 0.0;
    double V0 = 1.0;
    double theta0 = 0.0;
    double ws = 2.0 * std::numbers::pi * 60.0;  // slip-to-frequency scale, rad/s

    static constexpr int kCount = 9;
    static constexpr std::array<const char*, kCount> kNames = {"X",    "Xp",   "Td0p", "Tj", "s0",
                                                               "Exp0", "Eyp0", "Pz",   "Qz"};

    double get(int i) const;
    void set(int i, double v);
    static int index_of(const std::string& name);

    // Throws ValidationError on invariant violations.
    void validate() const;
    // Same parameters with E' and theta0 rotated by `angle`.
    LoadParameters rotated(double angle) const;
};

namespace motor {

struct SteadyState {
    double slip = 0.0;
    Complex emf;      // E'
    Complex current;  // stator current drawn from the bus
    double p = 0.0;
    double q = 0.0;
};

// Stator current drawn by the motor, I = (V - E') / (jX').
inline Complex stator_current(double xp, Complex e, Complex v) { return (v - e) / Complex(0.0, xp); }

// dE'/dt = (-E' + j(X - X')I) / T'd0 - j ws s E'
inline Complex emf_rate(const LoadParameters& m, double s, Complex e, Complex v) {
    const Complex i = stator_current(m.Xp, e, v);
    return (-e + Complex(0.0, m.X - m.Xp) * i) / m.Td0p - Complex(0.0, m.ws * s) * e;
}

// Electrical torque Te = Re(E' conj(I)), equal to the absorbed active power.
inline double electrical_torque(double xp, Complex e, Complex v) {
    return (e * std::conj(stator_current(xp, e, v))).real();
}

// Operating point absorbing active power p at bus voltage v; picks the
// low-slip (stable) branch. Throws InfeasibleError when no slip in (0, 1)
// carries the load.
SteadyState solve_steady_state(const LoadParameters& m, Complex v, double p);

}  // namespace motor
}  // namespace loadid
