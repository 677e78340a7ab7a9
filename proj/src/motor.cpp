#include <cmath>

#include "loadid/error.hpp"
#include "loadid/load_model.hpp"

namespace loadid {

double LoadParameters::get(int i) const {
    switch (i) {
        case 0: return X;
        case 1: return Xp;
        case 2: return Td0p;
        case 3: return Tj;
        case 4: return s0;
        case 5: return Exp0;
        case 6: return Eyp0;
        case 7: return Pz;
        case 8: return Qz;
        default: throw ValidationError("parameter index out of range");
    }
}

void LoadParameters::set(int i, double v) {
    switch (i) {
        case 0: X = v; break;
        case 1: Xp = v; break;
        case 2: Td0p = v; break;
        case 3: Tj = v; break;
        case 4: s0 = v; break;
        case 5: Exp0 = v; break;
        case 6: Eyp0 = v; break;
        case 7: Pz = v; break;
        case 8: Qz = v; break;
        default: throw ValidationError("parameter index out of range");
    }
}

int LoadParameters::index_of(const std::string& name) {
    for (int i = 0; i < kCount; ++i) {
        if (name == kNames[i]) return i;
    }
    throw ValidationError("unknown load parameter '" + name + "'");
}

void LoadParameters::validate() const {
    for (int i = 0; i < kCount; ++i) {
        if (!std::isfinite(get(i))) throw ValidationError(std::string("parameter ") + kNames[i] + " is not finite");
    }
    if (!(Xp > 0.0)) throw ValidationError("X' must be positive");
    if (!(X > Xp)) throw ValidationError("X must exceed X'");
    if (!(Td0p > 0.0)) throw ValidationError("T'd0 must be positive");
    if (!(Tj > 0.0)) throw ValidationError("Tj must be positive");
    if (!(s0 > 0.0 && s0 < 1.0)) throw ValidationError("slip must lie in (0, 1)");
    if (!(V0 > 0.0) || !std::isfinite(V0)) throw ValidationError("V0 must be positive");
    if (!std::isfinite(theta0)) throw ValidationError("theta0 must be finite");
    if (!(ws > 0.0)) throw ValidationError("ws must be positive");
}

LoadParameters LoadParameters::rotated(double angle) const {
    LoadParameters out = *this;
    const Complex e = Complex(Exp0, Eyp0) * std::polar(1.0, angle);
    out.Exp0 = e.real();
    out.Eyp0 = e.imag();
    out.theta0 = theta0 + angle;
    return out;
}

namespace motor {

SteadyState solve_steady_state(const LoadParameters& m, Complex v, double p) {
    const double vm = std::abs(v);
    if (!(vm > 0.0)) throw InfeasibleError("motor bus voltage is zero");
    if (!(p > 0.0)) throw InfeasibleError("motor bus carries no active load; no slip in (0, 1) balances torque");
    // With b = ws T'd0 X' s the bus-frame EMF is E' = (X - X') V / (X + j b) and
    // P = V^2 (X - X') b / (X' (X^2 + b^2)); solve the quadratic in b.
    const double k = m.X - m.Xp;
    const double a2 = p * m.Xp;
    const double a1 = -vm * vm * k;
    const double a0 = p * m.Xp * m.X * m.X;
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc < 0.0) {
        throw InfeasibleError("motor cannot carry P = " + std::to_string(p) + " at V = " + std::to_string(vm) +
                              " (exceeds pull-out torque)");
    }
    // Numerically stable smaller root.
    const double q = -0.5 * (a1 - std::sqrt(disc));
    const double b = a0 / q;
    const double slip = b / (m.ws * m.Td0p * m.Xp);
    if (!(slip > 0.0 && slip < 1.0)) {
        throw InfeasibleError("motor slip " + std::to_string(slip) + " outside (0, 1)");
    }
    const Complex e_bus = k * vm / Complex(m.X, b);
    SteadyState ss;
    ss.slip = slip;
    ss.emf = e_bus * (v / vm);
    ss.current = stator_current(m.Xp, ss.emf, v);
    const Complex s = v * std::conj(ss.current);
    ss.p = s.real();
    ss.q = s.imag();
    return ss;
}

}  // namespace motor
}  // namespace loadid
