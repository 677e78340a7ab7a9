#include "loadid/smallsig.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "loadid/error.hpp"

namespace loadid::sim {

namespace {

constexpr double kTimeEps = 1e-9;
const Complex kJ{0.0, 1.0};

}  // namespace

bool NoiseWindow::active_at(double t) const {
    return variance > 0.0 && t >= start - kTimeEps && t < end - kTimeEps;
}

int Scenario::substeps() const { return static_cast<int>(std::lround(ts / dt)); }

int Scenario::sample_count() const { return static_cast<int>(std::lround(duration / ts)) + 1; }

void Scenario::validate() const {
    if (!(duration > 0.0) || !(dt > 0.0) || !(ts > 0.0)) throw ValidationError("scenario times must be positive");
    const double ratio = ts / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
        throw ValidationError("sample period must be an integer multiple of the integration step");
    }
    const double n = duration / ts;
    if (std::abs(n - std::round(n)) > 1e-9) throw ValidationError("duration must be a multiple of the sample period");
    auto check = [&](const NoiseWindow& w, const char* what) {
        if (!(w.variance >= 0.0)) throw ValidationError(std::string(what) + " noise variance must be >= 0");
        if (w.variance > 0.0 && (w.start < -kTimeEps || w.end > duration + kTimeEps || w.end < w.start)) {
            throw ValidationError(std::string(what) + " noise window must lie within [0, duration]");
        }
    };
    check(internal, "internal");
    check(external, "external");
    if (external.variance > 0.0 && !external_bus) throw ValidationError("external noise needs a bus");
    if (!(measurement_variance >= 0.0)) throw ValidationError("measurement variance must be >= 0");
}

Eigen::MatrixXd MeasurementSeries::inputs() const {
    Eigen::MatrixXd u(rows(), 2);
    u.col(0) = values.col(V);
    u.col(1) = values.col(Theta);
    return u;
}

Eigen::MatrixXd MeasurementSeries::outputs() const {
    Eigen::MatrixXd y(rows(), 2);
    y.col(0) = values.col(P);
    y.col(1) = values.col(Q);
    return y;
}

Eigen::MatrixXd MeasurementSeries::rect_voltage() const {
    Eigen::MatrixXd v(rows(), 2);
    v.col(0) = values.col(Vx);
    v.col(1) = values.col(Vy);
    return v;
}

Eigen::MatrixXd MeasurementSeries::rect_current() const {
    Eigen::MatrixXd i(rows(), 2);
    i.col(0) = values.col(Ix);
    i.col(1) = values.col(Iy);
    return i;
}

MeasurementSeries MeasurementSeries::window(double t0, double t1) const {
    std::vector<int> keep;
    for (int k = 0; k < rows(); ++k) {
        if (time[k] >= t0 - kTimeEps && time[k] < t1 - kTimeEps) keep.push_back(k);
    }
    MeasurementSeries out;
    out.ts = ts;
    out.detrended = detrended;
    out.means = means;
    out.time.resize(static_cast<Eigen::Index>(keep.size()));
    out.values.resize(static_cast<Eigen::Index>(keep.size()), kColumns);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.time[static_cast<Eigen::Index>(r)] = time[keep[r]];
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(keep[r]);
    }
    return out;
}

void MeasurementSeries::validate() const {
    if (!(ts > 0.0)) throw ValidationError("series sample period must be positive");
    if (values.rows() != time.size() || values.cols() != kColumns) throw ValidationError("series shape mismatch");
    for (int k = 1; k < rows(); ++k) {
        if (std::abs(time[k] - time[k - 1] - ts) > 1e-6 * ts) {
            throw ValidationError("series time grid is not uniform at row " + std::to_string(k));
        }
    }
    if (!values.allFinite()) throw ValidationError("series contains non-finite values");
}

MeasurementSeries detrend(const MeasurementSeries& s) {
    if (s.rows() == 0) throw ValidationError("cannot detrend an empty series");
    MeasurementSeries out = s;
    const Eigen::VectorXd m = s.values.colwise().mean().transpose();
    out.values.rowwise() -= m.transpose();
    // Second pass removes rounding residue of the first.
    const Eigen::VectorXd m2 = out.values.colwise().mean().transpose();
    out.values.rowwise() -= m2.transpose();
    out.means = (s.detrended ? s.means : Eigen::VectorXd::Zero(MeasurementSeries::kColumns)) + m + m2;
    out.detrended = true;
    return out;
}

double nrmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
    if (a.rows() != ref.rows() || a.cols() != ref.cols()) throw ValidationError("nrmse shape mismatch");
    const double den = ref.norm();
    if (den == 0.0) return (a - ref).norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (a - ref).norm() / den;
}

// --- DynamicSystem -------------------------------------------------------

DynamicSystem::DynamicSystem(const grid::NetworkCase& c, const grid::PowerFlowSolution& pf,
                             const LoadParameters& motor, Complex y_static, int motor_bus_index)
    : ng_(static_cast<int>(c.generators.size())),
      motor_bus_(motor_bus_index),
      ws_(2.0 * std::numbers::pi * c.frequency_hz),
      motor_(motor),
      y_static_(y_static) {
    motor_.ws = ws_;
    const int motor_id = c.buses.at(motor_bus_index).id;
    grid::AdmittanceMatrix y = grid::build_admittance(c, true, motor_id, &pf);
    Eigen::MatrixXcd m = y.y;
    e_gen_.resize(ng_);
    xdp_.resize(ng_);
    tj_.resize(ng_);
    damping_.resize(ng_);
    delta0_.resize(ng_);
    pm_ = Eigen::VectorXd::Zero(ng_);
    for (int k = 0; k < ng_; ++k) {
        const auto& g = c.generators[k];
        const int b = c.index_of(g.bus);
        gen_bus_.push_back(b);
        xdp_[k] = g.xdp;
        tj_[k] = g.tj;
        damping_[k] = g.damping;
        // Classical EMF behind x'd from the power-flow injection at the bus.
        const Complex sg = Complex(pf.p_inj[b], pf.q_inj[b]) + c.load_at(g.bus);
        const Complex vg = std::polar(pf.vm[b], pf.va[b]);
        const Complex eg = vg + Complex(0.0, g.xdp) * std::conj(sg / vg);
        e_gen_[k] = std::abs(eg);
        delta0_[k] = std::arg(eg);
        m(b, b) += 1.0 / Complex(0.0, g.xdp);
    }
    m(motor_bus_, motor_bus_) += 1.0 / Complex(0.0, motor_.Xp) + y_static_;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
    if (!lu.isInvertible()) throw LinearizationError("network matrix with machine admittances is singular");
    minv_ = lu.inverse();
    v_eq_ = pf.voltage();
}

void DynamicSystem::set_operating_inputs(const Eigen::VectorXd& x) {
    const Eigen::VectorXcd v = bus_voltages(x, -1, 0.0);
    for (int k = 0; k < ng_; ++k) {
        const Complex eg = std::polar(e_gen_[k], x[k]);
        pm_[k] = (eg * std::conj(v[gen_bus_[k]])).imag() / xdp_[k] + damping_[k] * (x[ng_ + k] - 1.0);
    }
    const Complex e(x[2 * ng_], x[2 * ng_ + 1]);
    tm_ = motor::electrical_torque(motor_.Xp, e, v[motor_bus_]);
}

Complex DynamicSystem::injection_direction(int bus_index) const {
    const Complex v = v_eq_[bus_index];
    return v / std::abs(v);
}

Eigen::VectorXcd DynamicSystem::bus_voltages(const Eigen::VectorXd& x, int inj_bus, double xi_h) const {
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(minv_.rows());
    for (int k = 0; k < ng_; ++k) w[gen_bus_[k]] += std::polar(e_gen_[k], x[k]) / Complex(0.0, xdp_[k]);
    w[motor_bus_] += Complex(x[2 * ng_], x[2 * ng_ + 1]) / Complex(0.0, motor_.Xp);
    if (inj_bus >= 0) w[inj_bus] += xi_h * injection_direction(inj_bus);
    return minv_ * w;
}

Eigen::VectorXd DynamicSystem::rhs(const Eigen::VectorXd& x, double xi_i, int inj_bus, double xi_h) const {
    const Eigen::VectorXcd v = bus_voltages(x, inj_bus, xi_h);
    Eigen::VectorXd f(state_count());
    for (int k = 0; k < ng_; ++k) {
        const double om = x[ng_ + k];
        const Complex eg = std::polar(e_gen_[k], x[k]);
        const double pe = (eg * std::conj(v[gen_bus_[k]])).imag() / xdp_[k];
        f[k] = ws_ * (om - 1.0);
        f[ng_ + k] = (pm_[k] - pe - damping_[k] * (om - 1.0)) / tj_[k];
    }
    const Complex e(x[2 * ng_], x[2 * ng_ + 1]);
    const double s = x[2 * ng_ + 2];
    const Complex vm = v[motor_bus_];
    const Complex de = motor::emf_rate(motor_, s, e, vm);
    f[2 * ng_] = de.real();
    f[2 * ng_ + 1] = de.imag();
    f[2 * ng_ + 2] = (tm_ + xi_i - motor::electrical_torque(motor_.Xp, e, vm)) / motor_.Tj;
    return f;
}

Eigen::VectorXd DynamicSystem::outputs(const Eigen::VectorXd& x, int inj_bus, double xi_h) const {
    const Eigen::VectorXcd v = bus_voltages(x, inj_bus, xi_h);
    const Complex vm = v[motor_bus_];
    const Complex e(x[2 * ng_], x[2 * ng_ + 1]);
    const Complex il = motor::stator_current(motor_.Xp, e, vm) + y_static_ * vm;
    const Complex s = vm * std::conj(il);
    Eigen::VectorXd y(MeasurementSeries::kColumns);
    y << std::abs(vm), std::arg(vm), s.real(), s.imag(), vm.real(), vm.imag(), il.real(), il.imag();
    return y;
}

DynamicSystem::Linearization DynamicSystem::jacobian(const Eigen::VectorXd& x, int inj_bus, double xi_h) const {
    const int nx = state_count();
    const int ie = 2 * ng_;
    const Eigen::VectorXcd v = bus_voltages(x, inj_bus, xi_h);
    const Complex e(x[ie], x[ie + 1]);
    const double s = x[ie + 2];
    const Complex vm = v[motor_bus_];
    const Complex im = motor::stator_current(motor_.Xp, e, vm);
    const Complex il = im + y_static_ * vm;
    const double vabs = std::abs(vm);
    const Complex jxp(0.0, motor_.Xp);

    Linearization lin;
    lin.A = Eigen::MatrixXd::Zero(nx, nx);
    lin.B = Eigen::MatrixXd::Zero(nx, 2);
    lin.C = Eigen::MatrixXd::Zero(MeasurementSeries::kColumns, nx);
    lin.D = Eigen::MatrixXd::Zero(MeasurementSeries::kColumns, 2);

    // One column per state or input: perturbation of the network source
    // vector w plus direct perturbations of (delta_k, E', s).
    auto column = [&](int src_bus, Complex dw, int dgen, Complex de, double ds, int dom, Eigen::Ref<Eigen::VectorXd> fcol,
                      Eigen::Ref<Eigen::VectorXd> ycol) {
        Eigen::VectorXcd dv = Eigen::VectorXcd::Zero(v.size());
        if (src_bus >= 0) dv = minv_.col(src_bus) * dw;
        for (int k = 0; k < ng_; ++k) {
            const Complex eg = std::polar(e_gen_[k], x[k]);
            const Complex deg = (dgen == k) ? kJ * eg : Complex{};
            const double dpe = (deg * std::conj(v[gen_bus_[k]]) + eg * std::conj(dv[gen_bus_[k]])).imag() / xdp_[k];
            fcol[k] = (dom == k) ? ws_ : 0.0;
            fcol[ng_ + k] = (-dpe - ((dom == k) ? damping_[k] : 0.0)) / tj_[k];
        }
        const Complex dvm = dv[motor_bus_];
        const Complex dim = (dvm - de) / jxp;
        const Complex dde = (-de + Complex(0.0, motor_.X - motor_.Xp) * dim) / motor_.Td0p -
                            Complex(0.0, motor_.ws) * (ds * e + s * de);
        fcol[ie] = dde.real();
        fcol[ie + 1] = dde.imag();
        const double dte = (de * std::conj(im) + e * std::conj(dim)).real();
        fcol[ie + 2] = -dte / motor_.Tj;

        const Complex dil = dim + y_static_ * dvm;
        const Complex dsl = dvm * std::conj(il) + vm * std::conj(dil);
        ycol[MeasurementSeries::V] = (std::conj(vm) * dvm).real() / vabs;
        ycol[MeasurementSeries::Theta] = (std::conj(vm) * dvm).imag() / (vabs * vabs);
        ycol[MeasurementSeries::P] = dsl.real();
        ycol[MeasurementSeries::Q] = dsl.imag();
        ycol[MeasurementSeries::Vx] = dvm.real();
        ycol[MeasurementSeries::Vy] = dvm.imag();
        ycol[MeasurementSeries::Ix] = dil.real();
        ycol[MeasurementSeries::Iy] = dil.imag();
    };

    for (int k = 0; k < ng_; ++k) {
        const Complex eg = std::polar(e_gen_[k], x[k]);
        column(gen_bus_[k], eg / xdp_[k], k, {}, 0.0, -1, lin.A.col(k), lin.C.col(k));
        column(-1, {}, -1, {}, 0.0, k, lin.A.col(ng_ + k), lin.C.col(ng_ + k));
    }
    column(motor_bus_, 1.0 / jxp, -1, Complex(1.0, 0.0), 0.0, -1, lin.A.col(ie), lin.C.col(ie));
    column(motor_bus_, kJ / jxp, -1, kJ, 0.0, -1, lin.A.col(ie + 1), lin.C.col(ie + 1));
    column(-1, {}, -1, {}, 1.0, -1, lin.A.col(ie + 2), lin.C.col(ie + 2));
    lin.B(ie + 2, 0) = 1.0 / motor_.Tj;
    if (inj_bus >= 0) column(inj_bus, injection_direction(inj_bus), -1, {}, 0.0, -1, lin.B.col(1), lin.D.col(1));
    return lin;
}

// --- equilibrium ---------------------------------------------------------

Eigen::VectorXd SystemEquilibrium::outputs0() const { return system.outputs(x0, -1, 0.0); }

SystemEquilibrium init_equilibrium(const grid::NetworkCase& c, const grid::PowerFlowSolution& pf,
                                   const LoadParameters& motor_spec) {
    c.validate();
    const grid::Load* ml = c.motor_load();
    if (ml == nullptr) throw ValidationError("case has no motor load");
    if (pf.vm.size() != c.size()) throw StateError("power-flow solution does not match the case");
    const int mb = c.index_of(ml->bus);
    const Eigen::VectorXcd v = pf.voltage();
    const Complex vm = v[mb];

    LoadParameters motor = motor_spec;
    motor.ws = 2.0 * std::numbers::pi * c.frequency_hz;
    const motor::SteadyState ss = motor::solve_steady_state(motor, vm, ml->p);
    // Everything at the bus not absorbed by the motor is the static part.
    const Complex total = c.load_at(ml->bus);
    const double pz = total.real() - ss.p;
    const double qz = total.imag() - ss.q;
    const double v2 = std::norm(vm);

    SystemEquilibrium eq;
    eq.network = c;
    eq.pf = pf;
    eq.motor_bus_id = ml->bus;
    eq.bus_voltage = v;
    eq.system = DynamicSystem(c, pf, motor, Complex(pz, -qz) / v2, mb);

    const int ng = eq.system.generator_count();
    Eigen::VectorXd x(2 * ng + 3);
    x.head(ng) = eq.system.generator_angles0();
    x.segment(ng, ng).setOnes();
    x[2 * ng] = ss.emf.real();
    x[2 * ng + 1] = ss.emf.imag();
    x[2 * ng + 2] = ss.slip;
    eq.system.set_operating_inputs(x);
    eq.x0 = x;
    eq.residual = eq.system.rhs(x, 0.0, -1, 0.0).lpNorm<Eigen::Infinity>();
    if (!(eq.residual < 1e-9)) {
        throw StateError("equilibrium residual " + std::to_string(eq.residual) +
                         " exceeds 1e-9; solve the power flow to a tighter tolerance");
    }

    const double theta = std::arg(vm);
    eq.load = motor;
    eq.load.s0 = ss.slip;
    const Complex e_bus = ss.emf * std::polar(1.0, -theta);
    eq.load.Exp0 = e_bus.real();
    eq.load.Eyp0 = e_bus.imag();
    eq.load.Pz = pz;
    eq.load.Qz = qz;
    eq.load.V0 = std::abs(vm);
    eq.load.theta0 = 0.0;
    return eq;
}

// --- simulation ----------------------------------------------------------

Eigen::MatrixXd realize_disturbance(const Scenario& sc) {
    sc.validate();
    const int sub = sc.substeps();
    const int steps = sub * (sc.sample_count() - 1);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(steps + 1, 2);
    std::mt19937_64 rng_i(sc.internal.seed);
    std::mt19937_64 rng_h(sc.external.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Zero-order hold over each sample period Ts, as the discrete noise model assumes.
    const double gi = std::sqrt(sc.internal.variance);
    const double gh = std::sqrt(sc.external.variance);
    double hi = 0.0;
    double hh = 0.0;
    for (int k = 0; k <= steps; ++k) {
        if (k % sub == 0) {
            const double t = (k / sub) * sc.ts;
            const double zi = normal(rng_i);
            const double zh = normal(rng_h);
            hi = sc.internal.active_at(t) ? gi * zi : 0.0;
            hh = sc.external_bus && sc.external.active_at(t) ? gh * zh : 0.0;
        }
        d(k, 0) = hi;
        d(k, 1) = hh;
    }
    return d;
}

SimulationRecord simulate_detailed(const SystemEquilibrium& eq, const Scenario& sc) {
    sc.validate();
    const DynamicSystem& sys = eq.system;
    const int inj = sc.external_bus ? eq.network.index_of(*sc.external_bus) : -1;
    const int sub = sc.substeps();
    const int samples = sc.sample_count();
    const int nx = sys.state_count();
    const double dt = sc.dt;

    SimulationRecord rec;
    rec.disturbance = realize_disturbance(sc);
    MeasurementSeries& out = rec.series;
    out.ts = sc.ts;
    out.time.resize(samples);
    out.values.resize(samples, MeasurementSeries::kColumns);

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
    Eigen::VectorXd x = eq.x0;
    for (int k = 0; k < samples; ++k) {
        const int step0 = k * sub;
        out.time[k] = k * sc.ts;
        out.values.row(k) = sys.outputs(x, inj, rec.disturbance(step0, 1)).transpose();
        if (k == samples - 1) break;
        for (int j = 0; j < sub; ++j) {
            const int step = step0 + j;
            const double di = rec.disturbance(step, 0);
            const double dh = rec.disturbance(step, 1);
            const Eigen::VectorXd f0 = sys.rhs(x, di, inj, dh);
            Eigen::VectorXd x1 = x + dt * f0;
            bool converged = false;
            for (int it = 0; it < 25; ++it) {
                const Eigen::VectorXd res = x1 - x - 0.5 * dt * (f0 + sys.rhs(x1, di, inj, dh));
                const Eigen::MatrixXd jac = eye - 0.5 * dt * sys.jacobian(x1, inj, dh).A;
                const Eigen::VectorXd dx = jac.partialPivLu().solve(-res);
                x1 += dx;
                if (!dx.allFinite()) break;
                if (dx.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x1.lpNorm<Eigen::Infinity>())) {
                    converged = true;
                    break;
                }
            }
            const double t_end = (step + 1) * dt;
            if (!converged) {
                throw SimulationError("implicit step failed to converge at t = " + std::to_string(t_end) + " s");
            }
            const double slip = x1[nx - 1];
            if (!(slip > 0.0 && slip < 1.0)) {
                throw InstabilityError("motor slip left (0, 1) at t = " + std::to_string(t_end) + " s");
            }
            x = x1;
        }
    }
    if (sc.measurement_variance > 0.0) {
        std::mt19937_64 rng(sc.measurement_seed);
        std::normal_distribution<double> normal(0.0, std::sqrt(sc.measurement_variance));
        for (int k = 0; k < samples; ++k) {
            for (int c : {MeasurementSeries::V, MeasurementSeries::Theta, MeasurementSeries::P, MeasurementSeries::Q}) {
                out.values(k, c) += normal(rng);
            }
        }
    }
    return rec;
}

MeasurementSeries simulate(const SystemEquilibrium& eq, const Scenario& sc) {
    return simulate_detailed(eq, sc).series;
}

LinearSystem linearize_system(const SystemEquilibrium& eq, std::optional<int> injection_bus) {
    const int inj = injection_bus ? eq.network.index_of(*injection_bus) : -1;
    const auto lin = eq.system.jacobian(eq.x0, inj, 0.0);
    if (!lin.A.allFinite() || !lin.C.allFinite()) throw LinearizationError("non-finite linearization");
    LinearSystem ss{lin.A, lin.B, lin.C, lin.D, {}, {"xi_i", "xi_h"}, {}};
    const int ng = eq.system.generator_count();
    for (int k = 0; k < ng; ++k) ss.states.push_back("delta" + std::to_string(eq.network.generators[k].bus));
    for (int k = 0; k < ng; ++k) ss.states.push_back("omega" + std::to_string(eq.network.generators[k].bus));
    ss.states.insert(ss.states.end(), {"Exp", "Eyp", "s"});
    for (const char* n : MeasurementSeries::kNames) ss.outputs.emplace_back(n);
    return ss;
}

Eigen::MatrixXd simulate_linear(const LinearSystem& ss, const Eigen::MatrixXd& d, double dt, int decimation) {
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
    if (decimation < 1) throw ValidationError("decimation must be >= 1");
    if (d.cols() != ss.B.cols()) throw ValidationError("disturbance width does not match the model inputs");
    const Eigen::Index nx = ss.A.rows();
    const Eigen::Index nu = ss.B.cols();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
    aug.topLeftCorner(nx, nx) = ss.A * dt;
    aug.topRightCorner(nx, nu) = ss.B * dt;
    const Eigen::MatrixXd e = aug.exp();
    const Eigen::MatrixXd ad = e.topLeftCorner(nx, nx);
    const Eigen::MatrixXd bd = e.topRightCorner(nx, nu);
    const Eigen::Index n = d.rows();
    Eigen::MatrixXd y((n + decimation - 1) / decimation, ss.C.rows());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::VectorXd dk = d.row(k).transpose();
        if (k % decimation == 0) y.row(k / decimation) = (ss.C * x + ss.D * dk).transpose();
        x = ad * x + bd * dk;
    }
    return y;
}

MeasurementSeries linear_series(const Eigen::MatrixXd& y, double ts, const Eigen::VectorXd& offset) {
    if (y.cols() != MeasurementSeries::kColumns) throw ValidationError("linear output has wrong width");
    MeasurementSeries s;
    s.ts = ts;
    s.time = Eigen::VectorXd::LinSpaced(y.rows(), 0.0, ts * static_cast<double>(y.rows() - 1));
    s.values = y;
    s.values.rowwise() += offset.transpose();
    return s;
}

Eigen::VectorXcd eigenvalues(const LinearSystem& ss) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(ss.A, false);
    Eigen::VectorXcd ev = es.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return ev;
}

}  // namespace loadid::sim
