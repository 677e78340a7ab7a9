#include "loadid/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "loadid/error.hpp"

namespace loadid {

void FrequencyResponse::validate() const {
    if (static_cast<std::size_t>(omega.size()) != values.size()) throw ValidationError("FRF grid/value size mismatch");
    for (int k = 1; k < size(); ++k) {
        if (!(omega[k] > omega[k - 1])) throw ValidationError("FRF grid must be strictly ascending");
    }
    for (const auto& v : values) {
        if (!v.allFinite()) throw ValidationError("FRF contains non-finite values");
    }
}

Eigen::VectorXd log_grid(double f_lo_hz, double f_hi_hz, int points) {
    if (!(f_lo_hz > 0.0) || !(f_hi_hz > f_lo_hz) || points < 2) throw ValidationError("invalid frequency grid");
    Eigen::VectorXd w(points);
    const double a = std::log10(f_lo_hz);
    const double b = std::log10(f_hi_hz);
    for (int k = 0; k < points; ++k) {
        w[k] = 2.0 * std::numbers::pi * std::pow(10.0, a + (b - a) * k / (points - 1));
    }
    return w;
}

bool same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel_tol) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        if (std::abs(a[k] - b[k]) > rel_tol * std::max(1.0, std::abs(a[k]))) return false;
    }
    return true;
}

namespace diag {

std::vector<Eigen::MatrixXcd> SpectrumEstimate::block(int r0, int nr, int c0, int nc) const {
    std::vector<Eigen::MatrixXcd> out;
    out.reserve(S.size());
    for (const auto& s : S) out.push_back(s.block(r0, c0, nr, nc));
    return out;
}

SpectrumEstimate estimate_spectrum(const Eigen::MatrixXd& x, double ts, int segment, int overlap, Window window,
                                   SegmentDetrend detrend) {
    if (!(ts > 0.0)) throw ValidationError("sample period must be positive");
    if (segment < 2) throw ValidationError("segment length must be >= 2");
    if (overlap < 0) overlap = segment / 2;
    if (overlap >= segment) throw ValidationError("overlap must be shorter than the segment");
    const Eigen::Index n = x.rows();
    const Eigen::Index m = x.cols();
    if (n < segment) {
        throw ValidationError("series of " + std::to_string(n) + " samples is shorter than one segment (" +
                              std::to_string(segment) + ")");
    }
    Eigen::VectorXd w(segment);
    for (int k = 0; k < segment; ++k) {
        w[k] = window == Window::Hann ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / segment) : 1.0;
    }
    const double u = w.squaredNorm();
    const int hop = segment - overlap;
    const int bins = segment / 2 + 1;

    SpectrumEstimate est;
    est.segment = segment;
    est.overlap = overlap;
    est.window = window;
    est.detrend = detrend;
    est.ts = ts;
    est.omega.resize(bins);
    for (int k = 0; k < bins; ++k) est.omega[k] = 2.0 * std::numbers::pi * k / (segment * ts);
    est.S.assign(bins, Eigen::MatrixXcd::Zero(m, m));

    Eigen::MatrixXd basis(segment, 2);
    basis.col(0).setOnes();
    basis.col(1) = Eigen::VectorXd::LinSpaced(segment, -1.0, 1.0);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> basis_solver(basis);

    Eigen::FFT<double> fft;
    std::vector<double> seg(segment);
    std::vector<std::complex<double>> spec;
    Eigen::MatrixXcd coef(bins, m);
    int count = 0;
    for (Eigen::Index start = 0; start + segment <= n; start += hop) {
        for (Eigen::Index c = 0; c < m; ++c) {
            Eigen::VectorXd piece = x.col(c).segment(start, segment);
            if (detrend == SegmentDetrend::Constant) {
                piece.array() -= piece.mean();
            } else if (detrend == SegmentDetrend::Linear) {
                piece -= basis * basis_solver.solve(piece);
            }
            for (int k = 0; k < segment; ++k) seg[k] = w[k] * piece[k];
            fft.fwd(spec, seg);
            for (int k = 0; k < bins; ++k) coef(k, c) = spec[k];
        }
        for (int k = 0; k < bins; ++k) {
            const Eigen::VectorXcd v = coef.row(k).transpose();
            est.S[k] += v * v.adjoint();
        }
        ++count;
    }
    const double scale = ts / (2.0 * std::numbers::pi * u * count);
    for (auto& s : est.S) {
        s *= scale;
        s = (0.5 * (s + s.adjoint())).eval();
    }
    est.averages = count;
    return est;
}

InformativenessReport informativeness_test(const SpectrumEstimate& z, double f_lo_hz, double f_hi_hz,
                                           double eig_ratio_floor) {
    InformativenessReport rep;
    rep.floor = eig_ratio_floor;
    std::vector<double> f;
    std::vector<double> r;
    for (int k = 0; k < z.size(); ++k) {
        const double hz = z.omega[k] / (2.0 * std::numbers::pi);
        if (hz < f_lo_hz - 1e-12 || hz > f_hi_hz + 1e-12) continue;
        const Eigen::MatrixXcd& s = z.S[k];
        const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
        if ((s - s.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ValidationError("spectrum is not Hermitian at bin " + std::to_string(k));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s);
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = std::max(es.eigenvalues().minCoeff(), 0.0);
        f.push_back(hz);
        r.push_back(lmax > 0.0 ? lmin / lmax : 0.0);
    }
    if (f.empty()) throw ValidationError("no spectral bins inside the requested band");
    rep.freq_hz = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    rep.ratio = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    rep.min_ratio = rep.ratio.minCoeff();
    rep.informative = rep.min_ratio > eig_ratio_floor;
    return rep;
}

PEReport persistent_excitation_order(const Eigen::MatrixXd& u, int n_max, double threshold) {
    const Eigen::Index n = u.rows();
    const Eigen::Index m = u.cols();
    if (n_max < 1) throw ValidationError("PE order must be >= 1");
    if (3 * n_max > n) {
        throw ValidationError("PE order " + std::to_string(n_max) + " exceeds a third of the record length " +
                              std::to_string(n));
    }
    // Unbiased sample autocovariance R(tau) = E[u(k) u(k - tau)'].
    std::vector<Eigen::MatrixXd> r(n_max);
    for (int tau = 0; tau < n_max; ++tau) {
        const Eigen::Index len = n - tau;
        r[tau] = u.bottomRows(len).transpose() * u.topRows(len) / static_cast<double>(len);
    }
    PEReport rep;
    rep.threshold = threshold;
    bool ok = true;
    for (int order = 1; order <= n_max; ++order) {
        Eigen::MatrixXd t(order * m, order * m);
        for (int i = 0; i < order; ++i) {
            for (int j = 0; j < order; ++j) {
                if (j >= i) {
                    t.block(i * m, j * m, m, m) = r[j - i];
                } else {
                    t.block(i * m, j * m, m, m) = r[i - j].transpose();
                }
            }
        }
        t = (0.5 * (t + t.transpose())).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = es.eigenvalues().minCoeff();
        const double cond = (lmin > 0.0 && lmax > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            const double l = es.eigenvalues()[k];
            logdet += l > 0.0 ? std::log10(l) : -std::numeric_limits<double>::infinity();
        }
        rep.orders.push_back(order);
        rep.condition.push_back(cond);
        rep.log10_det.push_back(logdet);
        if (ok && cond < 1.0 / threshold) {
            rep.verified_order = order;
        } else {
            ok = false;
        }
    }
    return rep;
}

double max_singular_value(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
}

double min_singular_value(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

Eigen::VectorXd bias_bound(const FrequencyResponse& h0, const FrequencyResponse& htheta,
                           const Eigen::MatrixXcd& lambda0, const std::vector<Eigen::MatrixXcd>& phi_u,
                           const std::vector<Eigen::MatrixXcd>& phi_ue) {
    const int n = h0.size();
    if (!same_grid(h0.omega, htheta.omega) || static_cast<int>(phi_u.size()) != n ||
        static_cast<int>(phi_ue.size()) != n) {
        throw ValidationError("bias bound inputs must share one frequency grid");
    }
    const double l0 = max_singular_value(lambda0);
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        const double dh = max_singular_value(h0.values[k] - htheta.values[k]);
        const double umin = min_singular_value(phi_u[k]);
        if (!(umin > 1e-14 * std::max(max_singular_value(phi_u[k]), 1e-300))) {
            throw SingularityError("input spectrum is singular at bin " + std::to_string(k) + " (omega = " +
                                   std::to_string(h0.omega[k]) + " rad/s)");
        }
        const double ue = max_singular_value(phi_ue[k]);
        out[k] = dh * std::sqrt(l0 / umin) * std::sqrt(ue / umin);
    }
    return out;
}

Eigen::MatrixXcd residual_noise_spectrum(const Eigen::MatrixXcd& lambda0, const Eigen::MatrixXcd& phi_eu,
                                         const Eigen::MatrixXcd& phi_u) {
    return lambda0 - phi_eu * phi_u.fullPivLu().solve(phi_eu.adjoint());
}

}  // namespace diag
}  // namespace loadid
