#include "loadid/greybox.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "loadid/error.hpp"

namespace loadid::pem {

namespace {

const Complex kJ{0.0, 1.0};

// Real 2x2 block of the complex-linear map z -> c z.
Mat2 complex_block(Complex c) {
    Mat2 m;
    m << c.real(), -c.imag(), c.imag(), c.real();
    return m;
}

}  // namespace

NoiseChannel parse_channel(const std::string& s) {
    if (s == "torque") return NoiseChannel::Torque;
    if (s == "emf-wrong") return NoiseChannel::EmfWrong;
    if (s == "custom") return NoiseChannel::Custom;
    throw ValidationError("unknown noise channel '" + s + "' (torque|emf-wrong|custom)");
}

const char* channel_name(NoiseChannel c) {
    switch (c) {
        case NoiseChannel::Torque: return "torque";
        case NoiseChannel::EmfWrong: return "emf-wrong";
        case NoiseChannel::Custom: return "custom";
    }
    return "custom";
}

NoiseConfig NoiseConfig::make(NoiseChannel ch, double q, double r) {
    NoiseConfig n;
    n.channel = ch;
    n.Q = Eigen::MatrixXd::Constant(1, 1, q);
    n.R = r * Mat2::Identity();
    n.N = Eigen::MatrixXd::Zero(1, 2);
    return n;
}

void NoiseConfig::validate() const {
    const int m = dim();
    if (Q.rows() != Q.cols() || m < 1) throw ValidationError("Q must be square and non-empty");
    if (N.rows() != m || N.cols() != 2) throw ValidationError("N must be m x 2");
    if (channel != NoiseChannel::Custom && m != 1) throw ValidationError("built-in channels are scalar");
    if (channel == NoiseChannel::Custom &&
        (G_custom.rows() != 3 || G_custom.cols() != m || H_custom.rows() != 2 || H_custom.cols() != m)) {
        throw ValidationError("custom channel needs G (3 x m) and H (2 x m)");
    }
    Eigen::MatrixXd s(m + 2, m + 2);
    s << Q, N, N.transpose(), R;
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.cwiseAbs().maxCoeff())) {
        throw ValidationError("noise covariances must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff())) {
        throw ValidationError("stacked noise covariance must be positive semidefinite");
    }
}

GreyBoxContinuous assemble_continuous(const LoadParameters& p, const NoiseConfig& noise) {
    p.validate();
    noise.validate();
    const Complex vc = std::polar(p.V0, p.theta0);
    const Complex ej = std::polar(1.0, p.theta0);
    const Complex e(p.Exp0, p.Eyp0);
    const double kx = (p.X - p.Xp) / (p.Xp * p.Td0p);

    GreyBoxContinuous g;
    // dE'/dt = (-X/X' E' + (X - X')/X' Vc)/T'd0 - j ws s E'
    g.A.topLeftCorner<2, 2>() = complex_block(Complex(-p.X / (p.Xp * p.Td0p), -p.ws * p.s0));
    const Complex dfs = -kJ * p.ws * e;
    g.A(0, 2) = dfs.real();
    g.A(1, 2) = dfs.imag();
    // ds/dt = (Tm - Te)/Tj with Te = -Im(E' conj Vc)/X'
    g.A(2, 0) = -vc.imag() / (p.Xp * p.Tj);
    g.A(2, 1) = vc.real() / (p.Xp * p.Tj);
    g.A(2, 2) = 0.0;

    const Complex dfv = kx * ej;
    const Complex dft = kx * kJ * vc;
    g.B(0, 0) = dfv.real();
    g.B(1, 0) = dfv.imag();
    g.B(0, 1) = dft.real();
    g.B(1, 1) = dft.imag();
    g.B(2, 0) = (e * std::conj(ej)).imag() / (p.Xp * p.Tj);
    g.B(2, 1) = -(e * std::conj(vc)).real() / (p.Xp * p.Tj);

    // Motor S = j (V^2 - Vc conj E') / X'; static part S = V^2 (Pz + j Qz) / V0^2.
    const Complex ds_ex = kJ * (-vc) / p.Xp;
    const Complex ds_ey = kJ * (-vc * -kJ) / p.Xp;
    g.C << ds_ex.real(), ds_ey.real(), 0.0, ds_ex.imag(), ds_ey.imag(), 0.0;
    const Complex ds_v = kJ * (2.0 * p.V0 - ej * std::conj(e)) / p.Xp + 2.0 * Complex(p.Pz, p.Qz) / p.V0;
    const Complex ds_t = vc * std::conj(e) / p.Xp;
    g.D << ds_v.real(), ds_t.real(), ds_v.imag(), ds_t.imag();

    switch (noise.channel) {
        case NoiseChannel::Torque:
            g.G = Eigen::MatrixXd::Zero(3, 1);
            g.G(2, 0) = 1.0 / p.Tj;
            g.H = Eigen::MatrixXd::Zero(2, 1);
            break;
        case NoiseChannel::EmfWrong:
            g.G = Eigen::MatrixXd::Zero(3, 1);
            g.G(1, 0) = 1.0 / p.Td0p;
            g.H = Eigen::MatrixXd::Zero(2, 1);
            break;
        case NoiseChannel::Custom:
            g.G = noise.G_custom;
            g.H = noise.H_custom;
            break;
    }
    return g;
}

GreyBoxDiscrete discretize_zoh(const GreyBoxContinuous& c, double ts) {
    if (!(ts > 0.0)) throw ValidationError("sample period must be positive");
    const int m = static_cast<int>(c.G.cols());
    const int n = 3 + 2 + m;
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n, n);
    aug.block<3, 3>(0, 0) = c.A * ts;
    aug.block<3, 2>(0, 3) = c.B * ts;
    aug.block(0, 5, 3, m) = c.G * ts;
    const Eigen::MatrixXd e = aug.exp();
    GreyBoxDiscrete d;
    d.Ad = e.block<3, 3>(0, 0);
    d.Bd = e.block<3, 2>(0, 3);
    d.Gd = e.block(0, 5, 3, m);
    d.Cd = c.C;
    d.Dd = c.D;
    d.Hd = c.H;
    d.ts = ts;
    return d;
}

double spectral_radius(const Mat3& m) {
    Eigen::EigenSolver<Mat3> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

struct RiccatiTerms {
    Mat3 Qbar;   // Gd Q Gd'
    Mat32 Nbar;  // Gd (Q Hd' + N)
    Mat2 Rbar;   // R + Hd N + N' Hd' + Hd Q Hd'
};

RiccatiTerms riccati_terms(const GreyBoxDiscrete& d, const NoiseConfig& noise) {
    if (d.Gd.cols() != noise.dim()) throw ValidationError("noise dimension does not match the model channels");
    RiccatiTerms t;
    t.Qbar = d.Gd * noise.Q * d.Gd.transpose();
    t.Qbar = 0.5 * (t.Qbar + t.Qbar.transpose()).eval();
    t.Nbar = d.Gd * (noise.Q * d.Hd.transpose() + noise.N);
    t.Rbar = noise.R + d.Hd * noise.N + noise.N.transpose() * d.Hd.transpose() + d.Hd * noise.Q * d.Hd.transpose();
    t.Rbar = 0.5 * (t.Rbar + t.Rbar.transpose()).eval();
    return t;
}

Mat32 gain(const Mat3& P, const GreyBoxDiscrete& d, const RiccatiTerms& t) {
    const Mat2 s = d.Cd * P * d.Cd.transpose() + t.Rbar;
    return (d.Ad * P * d.Cd.transpose() + t.Nbar) * s.inverse();
}

}  // namespace

Mat3 riccati_map(const Mat3& P, const GreyBoxDiscrete& d, const NoiseConfig& noise) {
    const RiccatiTerms t = riccati_terms(d, noise);
    const Mat32 k = gain(P, d, t);
    const Mat3 next = d.Ad * P * d.Ad.transpose() - k * (d.Ad * P * d.Cd.transpose() + t.Nbar).transpose() + t.Qbar;
    return 0.5 * (next + next.transpose());
}

InnovationPredictor solve_dare(const GreyBoxDiscrete& d, const NoiseConfig& noise) {
    const RiccatiTerms t = riccati_terms(d, noise);
    Eigen::LLT<Mat2> rllt(t.Rbar);
    const double rcond = [&] {
        Eigen::SelfAdjointEigenSolver<Mat2> es(t.Rbar);
        return es.eigenvalues().minCoeff() / std::max(es.eigenvalues().maxCoeff(), 1e-300);
    }();
    if (rllt.info() != Eigen::Success || !(rcond > 1e-14)) {
        throw ConditioningError("innovation covariance Rbar is singular; raise the measurement-noise floor Rm");
    }
    const Mat2 rinv = t.Rbar.inverse();
    // Remove the cross term: A~ = Ad - Nbar Rbar^-1 Cd, Q~ = Qbar - Nbar Rbar^-1 Nbar'.
    const Mat3 at = d.Ad - t.Nbar * rinv * d.Cd;
    Mat3 qt = t.Qbar - t.Nbar * rinv * t.Nbar.transpose();
    qt = 0.5 * (qt + qt.transpose()).eval();

    // Structure-preserving doubling on the dual (filter) Riccati equation.
    Mat3 a = at.transpose();
    Mat3 g = d.Cd.transpose() * rinv * d.Cd;
    Mat3 h = qt;
    const Mat3 eye = Mat3::Identity();
    int it = 0;
    bool converged = false;
    for (; it < 60; ++it) {
        const Mat3 w = eye + g * h;
        Eigen::PartialPivLU<Mat3> lu(w);
        const Mat3 wa = lu.solve(a);
        const Mat3 wg = lu.solve(g);
        const Mat3 a1 = a * wa;
        Mat3 g1 = g + a * wg * a.transpose();
        Mat3 h1 = h + a.transpose() * h * wa;
        g1 = 0.5 * (g1 + g1.transpose()).eval();
        h1 = 0.5 * (h1 + h1.transpose()).eval();
        if (!h1.allFinite()) break;
        const double step = (h1 - h).norm();
        a = a1;
        g = g1;
        h = h1;
        if (step <= 1e-13 * h.norm() || step == 0.0) {
            converged = true;
            ++it;
            break;
        }
    }
    InnovationPredictor pred;
    pred.P = h;
    pred.iterations = it;
    const Mat3 resid = riccati_map(pred.P, d, noise) - pred.P;
    pred.residual = resid.norm();
    if (!converged || !pred.P.allFinite() || !(pred.residual < 1e-9)) {
        throw ConvergenceError("Riccati doubling did not converge (residual " + std::to_string(pred.residual) + ")");
    }
    pred.Kd = gain(pred.P, d, t);
    const Mat3 printed = d.Ad * pred.P * d.Ad.transpose() -
                         pred.Kd * (d.Ad * pred.P * d.Cd.transpose() + t.Nbar).transpose() + t.Qbar;
    pred.printed_residual = (printed - pred.P).norm();
    pred.F = d.Ad - pred.Kd * d.Cd;
    pred.Bp = d.Bd - pred.Kd * d.Dd;
    pred.spectral_radius = spectral_radius(pred.F);
    if (!(pred.spectral_radius < 1.0)) {
        throw ConvergenceError("Riccati solution is not stabilizing (spectral radius " +
                               std::to_string(pred.spectral_radius) + ")");
    }
    return pred;
}

InnovationPredictor open_loop_predictor(const GreyBoxDiscrete& d) {
    InnovationPredictor pred;
    pred.F = d.Ad;
    pred.Bp = d.Bd;
    pred.spectral_radius = spectral_radius(d.Ad);
    return pred;
}

Prediction predict(const InnovationPredictor& pred, const GreyBoxDiscrete& d, const Eigen::MatrixXd& u,
                   const Eigen::MatrixXd& y) {
    if (u.cols() != 2 || y.cols() != 2 || u.rows() != y.rows()) {
        throw ValidationError("predict expects N x 2 input and output records");
    }
    const Eigen::Index n = u.rows();
    Prediction out;
    out.yhat.resize(n, 2);
    out.eps.resize(n, 2);
    Eigen::Vector3d x = pred.x0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Vector2d uk = u.row(k).transpose();
        const Eigen::Vector2d yk = y.row(k).transpose();
        const Eigen::Vector2d yh = d.Cd * x + d.Dd * uk;
        out.yhat.row(k) = yh.transpose();
        out.eps.row(k) = (yk - yh).transpose();
        x = pred.F * x + pred.Bp * uk + pred.Kd * yk;
    }
    return out;
}

double loss(const Eigen::MatrixXd& eps, int burn_in) {
    const Eigen::Index n = eps.rows() - burn_in;
    if (burn_in < 0 || n <= 0) throw ValidationError("loss needs samples after the burn-in");
    return eps.bottomRows(n).rowwise().squaredNorm().sum() / static_cast<double>(n);
}

}  // namespace loadid::pem
