#include "loadid/closed_loop.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "loadid/error.hpp"

namespace loadid::loop {

namespace {

const Complex kJ(0.0, 1.0);

std::string omega_text(double w) { return std::to_string(w) + " rad/s"; }

// 2x2 real matrix of z * conj(.) acting on (re, im).
Eigen::Matrix2d real_conj_mul(Complex z) {
    Eigen::Matrix2d m;
    m << z.real(), z.imag(), z.imag(), -z.real();
    return m;
}

FrequencyResponse labelled(const Eigen::VectorXd& omega, std::vector<std::string> in, std::vector<std::string> out) {
    FrequencyResponse f;
    f.omega = omega;
    f.values.reserve(omega.size());
    f.inputs = std::move(in);
    f.outputs = std::move(out);
    return f;
}

void check_grid(const Eigen::VectorXd& omega) {
    for (Eigen::Index k = 0; k < omega.size(); ++k) {
        if (!std::isfinite(omega[k])) throw ValidationError("frequency grid contains non-finite values");
        if (k > 0 && !(omega[k] > omega[k - 1])) throw ValidationError("frequency grid must be strictly ascending");
    }
}

Eigen::MatrixXcd pinv(const Eigen::MatrixXcd& m, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cut = s.size() > 0 ? rel_tol * s[0] : 0.0;
    Eigen::VectorXcd inv(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) inv[k] = s[k] > cut ? 1.0 / s[k] : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace

GeneratorModel generator_model(Complex emf, Complex bus_voltage, double xdp, double tj, double damping, double ws) {
    if (!(xdp > 0.0) || !(tj > 0.0)) throw ValidationError("generator x'd and Tj must be positive");
    GeneratorModel g;
    const double sync = (emf * std::conj(bus_voltage)).real() / xdp;
    g.A << 0.0, ws, -sync / tj, -damping / tj;
    g.B << 0.0, 0.0, -emf.imag() / (xdp * tj), emf.real() / (xdp * tj);
    g.C << emf.real() / xdp, 0.0, emf.imag() / xdp, 0.0;
    g.D << 0.0, -1.0 / xdp, 1.0 / xdp, 0.0;
    return g;
}

Eigen::Matrix2cd generator_frf(const GeneratorModel& g, double omega) {
    const Eigen::Matrix2cd m = kJ * omega * Eigen::Matrix2cd::Identity() - g.A.cast<Complex>();
    const Complex det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (std::abs(det) <= 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff() * m.cwiseAbs().maxCoeff())) {
        throw SingularityError("generator resonance at " + omega_text(omega));
    }
    return g.C.cast<Complex>() * m.inverse() * g.B.cast<Complex>() + g.D.cast<Complex>();
}

Eigen::MatrixXcd expanded_network(const sim::SystemEquilibrium& eq, double omega) {
    const grid::AdmittanceMatrix y = grid::build_admittance(eq.network, true, eq.motor_bus_id, &eq.pf);
    Eigen::MatrixXcd ybar = grid::expand_real(y.y).cast<Complex>();
    const auto& sys = eq.system;
    for (int k = 0; k < sys.generator_count(); ++k) {
        const int b = sys.generator_buses()[k];
        const Complex eg = std::polar(sys.generator_emf()[k], eq.x0[k]);
        const GeneratorModel g = generator_model(eg, eq.bus_voltage[b], sys.generator_xdp()[k],
                                                 sys.generator_tj()[k], sys.generator_damping()[k], sys.ws());
        ybar.block<2, 2>(2 * b, 2 * b) -= generator_frf(g, omega);
    }
    return ybar;
}

Eigen::VectorXd injection_vector(const sim::SystemEquilibrium& eq, int bus_id) {
    const int b = eq.network.index_of(bus_id);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * eq.network.size());
    const Complex d = eq.system.injection_direction(b);
    v[2 * b] = d.real();
    v[2 * b + 1] = d.imag();
    return v;
}

NetworkReduction reduce_to_load(const sim::SystemEquilibrium& eq, const Eigen::VectorXd& omega,
                                std::optional<int> disturbance_bus) {
    check_grid(omega);
    const int n = eq.network.size();
    const int li = eq.network.index_of(eq.motor_bus_id);
    std::vector<int> rest;
    for (int k = 0; k < 2 * n; ++k) {
        if (k / 2 != li) rest.push_back(k);
    }
    const int nr = static_cast<int>(rest.size());
    Eigen::VectorXd bvec;
    if (disturbance_bus) bvec = injection_vector(eq, *disturbance_bus);

    NetworkReduction out;
    out.K = labelled(omega, {"Vx", "Vy"}, {"Ix", "Iy"});
    if (disturbance_bus) out.Kh = labelled(omega, {"xi_h"}, {"Ix", "Iy"});
    for (Eigen::Index w = 0; w < omega.size(); ++w) {
        const Eigen::MatrixXcd ybar = expanded_network(eq, omega[w]);
        Eigen::MatrixXcd yrr(nr, nr), yri(nr, 2), yir(2, nr);
        for (int a = 0; a < nr; ++a) {
            for (int b = 0; b < nr; ++b) yrr(a, b) = ybar(rest[a], rest[b]);
            for (int c = 0; c < 2; ++c) {
                yri(a, c) = ybar(rest[a], 2 * li + c);
                yir(c, a) = ybar(2 * li + c, rest[a]);
            }
        }
        const Eigen::Matrix2cd yii = ybar.block<2, 2>(2 * li, 2 * li);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(yrr);
        const double rc = lu.rcond();
        if (!(rc > 1e-13)) throw SingularityError("singular elimination block at " + omega_text(omega[w]));
        out.K.values.push_back(-(yii - yir * lu.solve(yri)));
        if (disturbance_bus) {
            Eigen::VectorXcd br(nr);
            for (int a = 0; a < nr; ++a) br[a] = bvec[rest[a]];
            const Eigen::Vector2cd bi(bvec[2 * li], bvec[2 * li + 1]);
            out.Kh->values.push_back(-(yir * lu.solve(br) - bi));
        }
    }
    return out;
}

namespace {

struct RectTransform {
    Eigen::Matrix2d t_in;  // (dVx, dVy) -> (dV, dtheta)
    Eigen::Matrix2d t_s;   // (dP, dQ) -> current part
    Eigen::Matrix2d t_v;   // (dVx, dVy) -> current part at fixed S
};

RectTransform rect_transform(const LoadParameters& p, Complex s_total) {
    const Complex v = std::polar(p.V0, p.theta0);
    RectTransform t;
    const double c = std::cos(p.theta0);
    const double sn = std::sin(p.theta0);
    t.t_in << c, sn, -sn / p.V0, c / p.V0;
    t.t_s = real_conj_mul(1.0 / std::conj(v));
    t.t_v = real_conj_mul(-std::conj(s_total) / (std::conj(v) * std::conj(v)));
    return t;
}

Complex total_power(const LoadParameters& p, bool include_motor) {
    Complex s(p.Pz, p.Qz);
    if (include_motor) {
        const Complex v = std::polar(p.V0, p.theta0);
        s += v * std::conj(motor::stator_current(p.Xp, Complex(p.Exp0, p.Eyp0), v));
    }
    return s;
}

}  // namespace

FrequencyResponse load_frf(const LoadParameters& p, const Eigen::VectorXd& omega, bool include_motor) {
    p.validate();
    check_grid(omega);
    const pem::GreyBoxContinuous gb = pem::assemble_continuous(p, pem::NoiseConfig{});
    const RectTransform t = rect_transform(p, total_power(p, include_motor));
    Eigen::Matrix2d d = gb.D;
    if (!include_motor) {
        // Constant-impedance part only: P = Pz (V/V0)^2, Q = Qz (V/V0)^2.
        d << 2.0 * p.Pz / p.V0, 0.0, 2.0 * p.Qz / p.V0, 0.0;
    }
    FrequencyResponse f = labelled(omega, {"Vx", "Vy"}, {"Ix", "Iy"});
    for (Eigen::Index w = 0; w < omega.size(); ++w) {
        Eigen::Matrix2cd h = d.cast<Complex>();
        if (include_motor) {
            const Eigen::Matrix3cd m = kJ * omega[w] * Eigen::Matrix3cd::Identity() - gb.A.cast<Complex>();
            h += gb.C.cast<Complex>() * m.partialPivLu().solve(gb.B.cast<Complex>());
        }
        f.values.push_back(t.t_s.cast<Complex>() * h * t.t_in.cast<Complex>() + t.t_v.cast<Complex>());
    }
    return f;
}

FrequencyResponse load_noise_frf(const LoadParameters& p, const pem::NoiseConfig& noise, const Eigen::VectorXd& omega) {
    p.validate();
    noise.validate();
    check_grid(omega);
    const pem::GreyBoxContinuous gb = pem::assemble_continuous(p, noise);
    const RectTransform t = rect_transform(p, total_power(p, true));
    std::vector<std::string> in;
    for (int k = 0; k < noise.dim(); ++k) in.push_back("xi_i" + std::to_string(k));
    FrequencyResponse f = labelled(omega, in, {"Ix", "Iy"});
    for (Eigen::Index w = 0; w < omega.size(); ++w) {
        const Eigen::Matrix3cd m = kJ * omega[w] * Eigen::Matrix3cd::Identity() - gb.A.cast<Complex>();
        const Eigen::MatrixXcd h =
            gb.C.cast<Complex>() * m.partialPivLu().solve(gb.G.cast<Complex>()) + gb.H.cast<Complex>();
        f.values.push_back(t.t_s.cast<Complex>() * h);
    }
    return f;
}

FrequencyResponse closed_loop_response(const FrequencyResponse& K, const FrequencyResponse& Kh,
                                       const FrequencyResponse& G, const FrequencyResponse& Hi,
                                       const Eigen::VectorXd& phi_i, const Eigen::VectorXd& phi_h) {
    const int n = K.size();
    if (!same_grid(K.omega, Kh.omega) || !same_grid(K.omega, G.omega) || !same_grid(K.omega, Hi.omega) ||
        phi_i.size() != n || phi_h.size() != n) {
        throw ValidationError("closed-loop inputs must share one frequency grid");
    }
    FrequencyResponse out = labelled(K.omega, {"Vx", "Vy"}, {"Ix", "Iy"});
    for (int w = 0; w < n; ++w) {
        if (phi_i[w] < 0.0 || phi_h[w] < 0.0) throw ValidationError("disturbance spectra must be non-negative");
        const Eigen::MatrixXcd& k = K.values[w];
        const Eigen::MatrixXcd& g = G.values[w];
        const Eigen::MatrixXcd diff = k - g;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(diff);
        if (!lu.isInvertible() || lu.rcond() < 1e-13) {
            throw SingularityError("K - G is singular at " + omega_text(K.omega[w]));
        }
        // dV_i = (K - G)^-1 H xi_i, dV_h = (G - K)^-1 K_h xi_h.
        const Eigen::MatrixXcd a = lu.solve(Hi.values[w]);
        const Eigen::MatrixXcd b = -lu.solve(Kh.values[w]);
        const double wa = a.squaredNorm() * phi_i[w];
        const double wb = b.squaredNorm() * phi_h[w];
        if (!(wa + wb > 0.0)) throw ValidationError("both disturbance spectra vanish at " + omega_text(K.omega[w]));
        const Eigen::MatrixXcd pv = phi_i[w] * a * a.adjoint() + phi_h[w] * b * b.adjoint();
        const Eigen::MatrixXcd piv = phi_i[w] * k * a * a.adjoint() + phi_h[w] * g * b * b.adjoint();
        const Eigen::MatrixXcd pinv_v = pinv(pv, 1e-12);
        // Directions not excited are filled with the power-weighted average.
        const Eigen::MatrixXcd fill = (wa * k + wb * g) / (wa + wb);
        const Eigen::MatrixXcd proj = pv * pinv_v;
        out.values.push_back(piv * pinv_v + fill * (Eigen::MatrixXcd::Identity(2, 2) - proj));
    }
    return out;
}

Superposition superposition_decompose(const sim::LinearSystem& ss, const Eigen::VectorXd& xi_i,
                                      const Eigen::VectorXd& xi_h, double dt, int decimation) {
    if (ss.B.cols() != 2) throw ValidationError("linear system must have inputs (xi_i, xi_h)");
    if (xi_i.size() != xi_h.size()) throw ValidationError("disturbance sequences must share one grid");
    using Col = sim::MeasurementSeries;
    Eigen::MatrixXd di = Eigen::MatrixXd::Zero(xi_i.size(), 2);
    Eigen::MatrixXd dh = di;
    di.col(0) = xi_i;
    dh.col(1) = xi_h;
    const Eigen::MatrixXd yi = sim::simulate_linear(ss, di, dt, decimation);
    const Eigen::MatrixXd yh = sim::simulate_linear(ss, dh, dt, decimation);
    Superposition s;
    s.v_i = yi.middleCols(Col::Vx, 2);
    s.i_i = yi.middleCols(Col::Ix, 2);
    s.v_h = yh.middleCols(Col::Vx, 2);
    s.i_h = yh.middleCols(Col::Ix, 2);
    return s;
}

StateSpace network_state_space(const sim::SystemEquilibrium& eq) {
    const auto& sys = eq.system;
    const int n = eq.network.size();
    const int ng = sys.generator_count();
    const int li = eq.network.index_of(eq.motor_bus_id);
    const grid::AdmittanceMatrix y = grid::build_admittance(eq.network, true, eq.motor_bus_id, &eq.pf);
    // M dV = E x - e_L dI_L with generator feedthrough moved into M.
    Eigen::MatrixXd m = grid::expand_real(y.y);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(2 * n, 2 * ng);
    Eigen::MatrixXd ag = Eigen::MatrixXd::Zero(2 * ng, 2 * ng);
    Eigen::MatrixXd bg = Eigen::MatrixXd::Zero(2 * ng, 2 * n);
    for (int k = 0; k < ng; ++k) {
        const int b = sys.generator_buses()[k];
        const Complex eg = std::polar(sys.generator_emf()[k], eq.x0[k]);
        const GeneratorModel g = generator_model(eg, eq.bus_voltage[b], sys.generator_xdp()[k], sys.generator_tj()[k],
                                                 sys.generator_damping()[k], sys.ws());
        m.block<2, 2>(2 * b, 2 * b) -= g.D;
        e.block<2, 2>(2 * b, 2 * k) += g.C;
        ag.block<2, 2>(2 * k, 2 * k) = g.A;
        bg.block<2, 2>(2 * k, 2 * b) = g.B;
    }
    std::vector<int> rest;
    for (int k = 0; k < 2 * n; ++k) {
        if (k / 2 != li) rest.push_back(k);
    }
    const int nr = static_cast<int>(rest.size());
    Eigen::MatrixXd mrr(nr, nr), mri(nr, 2), mir(2, nr), er(nr, 2 * ng);
    for (int a = 0; a < nr; ++a) {
        for (int b = 0; b < nr; ++b) mrr(a, b) = m(rest[a], rest[b]);
        for (int c = 0; c < 2; ++c) {
            mri(a, c) = m(rest[a], 2 * li + c);
            mir(c, a) = m(2 * li + c, rest[a]);
        }
        er.row(a) = e.row(rest[a]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mrr);
    if (!lu.isInvertible()) throw SingularityError("network block without the load bus is singular");
    const Eigen::MatrixXd vr_x = lu.solve(er);
    const Eigen::MatrixXd vr_u = -lu.solve(mri);
    // Full voltage vector dV = F x + H dV_L.
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2 * n, 2 * ng);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2);
    for (int a = 0; a < nr; ++a) {
        f.row(rest[a]) = vr_x.row(a);
        h.row(rest[a]) = vr_u.row(a);
    }
    h.block<2, 2>(2 * li, 0).setIdentity();
    StateSpace ss;
    ss.A = ag + bg * f;
    ss.B = bg * h;
    ss.C = e.middleRows(2 * li, 2) - mir * vr_x;
    ss.D = -(m.block<2, 2>(2 * li, 2 * li) + mir * vr_u);
    return ss;
}

StateSpace load_state_space(const LoadParameters& p) {
    p.validate();
    const pem::GreyBoxContinuous gb = pem::assemble_continuous(p, pem::NoiseConfig{});
    const RectTransform t = rect_transform(p, total_power(p, true));
    StateSpace ss;
    ss.A = gb.A;
    ss.B = gb.B * t.t_in;
    ss.C = t.t_s * gb.C;
    ss.D = t.t_s * gb.D * t.t_in + t.t_v;
    return ss;
}

Eigen::MatrixXcd frequency_response(const StateSpace& ss, double omega) {
    const Eigen::Index n = ss.A.rows();
    const Eigen::MatrixXcd m = kJ * omega * Eigen::MatrixXcd::Identity(n, n) - ss.A.cast<Complex>();
    return ss.C.cast<Complex>() * m.fullPivLu().solve(ss.B.cast<Complex>()) + ss.D.cast<Complex>();
}

Eigen::MatrixXd simulate_foh(const StateSpace& ss, const Eigen::MatrixXd& u, double ts) {
    const Eigen::Index n = ss.A.rows();
    const Eigen::Index m = ss.B.cols();
    if (u.cols() != m) throw ValidationError("input width does not match the system");
    // exp([[A, B, 0], [0, 0, I/ts], [0, 0, 0]] ts) yields Phi, Gamma0, Gamma1.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 2 * m, n + 2 * m);
    aug.topLeftCorner(n, n) = ss.A * ts;
    aug.block(0, n, n, m) = ss.B * ts;
    aug.block(n, n + m, m, m) = Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd ex = aug.exp();
    const Eigen::MatrixXd phi = ex.topLeftCorner(n, n);
    const Eigen::MatrixXd g0 = ex.block(0, n, n, m);
    const Eigen::MatrixXd g1 = ex.block(0, n + m, n, m);
    Eigen::MatrixXd y(u.rows(), ss.C.rows());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        const Eigen::VectorXd uk = u.row(k).transpose();
        y.row(k) = (ss.C * x + ss.D * uk).transpose();
        if (k + 1 < u.rows()) x = phi * x + (g0 - g1) * uk + g1 * u.row(k + 1).transpose();
    }
    return y;
}

PitfallReport validate_pitfall(const sim::SystemEquilibrium& eq, const sim::MeasurementSeries& s, int segment,
                               double nrmse_threshold, double coherence_threshold) {
    using Col = sim::MeasurementSeries;
    s.validate();
    // Deviations from the equilibrium.
    const Eigen::VectorXd y0 = eq.outputs0();
    Eigen::RowVectorXd offset = Eigen::RowVectorXd::Zero(Col::kColumns);
    if (s.detrended) offset = s.means.transpose();
    offset -= y0.transpose();
    const Eigen::MatrixXd dv = s.rect_voltage().rowwise() + offset.segment(Col::Vx, 2);
    const Eigen::MatrixXd di = s.rect_current().rowwise() + offset.segment(Col::Ix, 2);

    const Complex vb = eq.bus_voltage[eq.network.index_of(eq.motor_bus_id)];
    PitfallReport rep;
    rep.coherence_threshold = coherence_threshold;
    rep.current = di;
    rep.k_filtered = simulate_foh(network_state_space(eq), dv, s.ts);
    rep.g_filtered = simulate_foh(load_state_space(eq.load.rotated(std::arg(vb))), dv, s.ts);

    Eigen::MatrixXd z(di.rows(), 8);
    z << di, dv, di - rep.k_filtered, di - rep.g_filtered;
    const diag::SpectrumEstimate est =
        diag::estimate_spectrum(z, s.ts, segment, -1, diag::Window::Hann, diag::SegmentDetrend::Linear);
    const int n = est.size() - 1;  // DC bin skipped
    rep.freq_hz = est.omega.tail(n) / (2.0 * std::numbers::pi);
    rep.coherence.resize(n);
    rep.resid_k.resize(n);
    rep.resid_g.resize(n);
    double num = 0.0;
    double den = 0.0;
    bool all_closer = true;
    for (int w = 0; w < n; ++w) {
        const Eigen::MatrixXcd& sz = est.S[w + 1];
        const Eigen::MatrixXcd pi = sz.block(0, 0, 2, 2);
        const Eigen::MatrixXcd piv = sz.block(0, 2, 2, 2);
        const Eigen::MatrixXcd pv = sz.block(2, 2, 2, 2);
        const Eigen::MatrixXcd explained = piv * pinv(pv, 1e-10) * piv.adjoint();
        double coh = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double pic = pi(c, c).real();
            coh += pic > 0.0 ? std::clamp(explained(c, c).real() / pic, 0.0, 1.0) : 0.0;
        }
        coh *= 0.5;
        const double ti = pi.trace().real();
        const double tk = sz.block(4, 4, 2, 2).trace().real();
        const double tg = sz.block(6, 6, 2, 2).trace().real();
        rep.coherence[w] = coh;
        rep.resid_k[w] = ti > 0.0 ? tk / ti : 0.0;
        rep.resid_g[w] = ti > 0.0 ? tg / ti : 0.0;
        num += coh * tk;
        den += coh * ti;
        if (coh > coherence_threshold) {
            ++rep.high_coherence_bins;
            if (tk < tg) {
                ++rep.closer_to_k;
            } else {
                all_closer = false;
            }
        }
    }
    rep.nrmse = den > 0.0 ? std::sqrt(num / den) : std::numeric_limits<double>::infinity();
    rep.time_nrmse = sim::nrmse(rep.k_filtered, di);
    rep.k_explains = rep.nrmse < nrmse_threshold && rep.high_coherence_bins > 0 && all_closer;
    rep.regime = rep.k_explains ? "feedback-dominant" : "feedforward-dominant";
    return rep;
}

}  // namespace loadid::loop
