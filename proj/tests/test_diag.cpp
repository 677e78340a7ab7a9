#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "loadid/spectral.hpp"

using namespace loadid;
using namespace loadid::diag;
using Complex = std::complex<double>;

namespace {

Eigen::MatrixXd white(int n, int m, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Eigen::MatrixXd x(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) x(i, j) = g(rng);
    return x;
}

FrequencyResponse constant_frf(const Eigen::VectorXd& omega, const Eigen::MatrixXcd& v) {
    FrequencyResponse f;
    f.omega = omega;
    f.values.assign(omega.size(), v);
    return f;
}

}  // namespace

TEST_SUITE("sysid_diag") {
    TEST_CASE("white noise spectrum level") {
        const double s2 = 4.0;
        const double ts = 0.01;
        const SpectrumEstimate s = estimate_spectrum(white(1 << 16, 1, std::sqrt(s2), 1), ts, 256, 128);
        double mean = 0.0;
        for (int k = 1; k < s.size() - 1; ++k) mean += s.S[k](0, 0).real();
        mean /= s.size() - 2;
        CHECK(mean == doctest::Approx(s2 * ts / (2.0 * std::numbers::pi)).epsilon(0.03));
        CHECK(s.omega[s.size() - 1] == doctest::Approx(std::numbers::pi / ts));
    }

    TEST_CASE("sinusoid peaks at its frequency") {
        const double ts = 0.01;
        const double f0 = 12.5;
        Eigen::MatrixXd x(4096, 1);
        for (int i = 0; i < 4096; ++i) x(i, 0) = std::sin(2.0 * std::numbers::pi * f0 * i * ts);
        const SpectrumEstimate s = estimate_spectrum(x, ts, 256, 128);
        int peak = 0;
        for (int k = 0; k < s.size(); ++k)
            if (s.S[k](0, 0).real() > s.S[peak](0, 0).real()) peak = k;
        CHECK(s.omega[peak] / (2.0 * std::numbers::pi) == doctest::Approx(f0).epsilon(1e-9));
    }

    TEST_CASE("cross-spectrum matrices are Hermitian") {
        const SpectrumEstimate s = estimate_spectrum(white(4000, 3, 1.0, 2), 0.01, 128, 64);
        for (const auto& m : s.S) CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("independent channels are informative") {
        const SpectrumEstimate s = estimate_spectrum(white(20000, 2, 1.0, 3), 0.01, 128, 64);
        const InformativenessReport r = informativeness_test(s, 0.0, 10.0);
        CHECK(r.informative);
        CHECK(r.min_ratio > 0.1);
    }

    TEST_CASE("copied channel is not informative") {
        Eigen::MatrixXd x = white(8000, 2, 1.0, 4);
        x.col(1) = x.col(0);
        const InformativenessReport r = informativeness_test(estimate_spectrum(x, 0.01, 128, 64), 0.0, 10.0);
        CHECK_FALSE(r.informative);
        CHECK(r.min_ratio < 1e-12);
    }

    TEST_CASE("constant input has excitation order one") {
        const PEReport r = persistent_excitation_order(Eigen::MatrixXd::Ones(500, 1), 20);
        CHECK(r.verified_order == 1);
    }

    TEST_CASE("white noise is persistently exciting to high order") {
        const PEReport r = persistent_excitation_order(white(5000, 1, 1.0, 5), 60);
        CHECK(r.verified_order >= 50);
        CHECK(r.orders.size() == 60);
    }

    TEST_CASE("sinusoid has excitation order two") {
        Eigen::MatrixXd x(2000, 1);
        for (int i = 0; i < 2000; ++i) x(i, 0) = std::sin(0.3 * i);
        CHECK(persistent_excitation_order(x, 10).verified_order == 2);
    }

    TEST_CASE("bias bound vanishes for the true noise model") {
        const Eigen::VectorXd omega = Eigen::VectorXd::LinSpaced(5, 0.1, 1.0);
        Eigen::MatrixXcd h(1, 1);
        h(0, 0) = Complex(1.0, 0.4);
        const auto f = constant_frf(omega, h);
        const std::vector<Eigen::MatrixXcd> phi(5, Eigen::MatrixXcd::Constant(1, 1, 2.0));
        const Eigen::VectorXd b = bias_bound(f, f, Eigen::MatrixXcd::Constant(1, 1, 1.0), phi, phi);
        CHECK(b.cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("bias bound vanishes without noise-input correlation") {
        const Eigen::VectorXd omega = Eigen::VectorXd::LinSpaced(5, 0.1, 1.0);
        const auto h0 = constant_frf(omega, Eigen::MatrixXcd::Constant(1, 1, 1.0));
        const auto ht = constant_frf(omega, Eigen::MatrixXcd::Constant(1, 1, 2.0));
        const std::vector<Eigen::MatrixXcd> phi_u(5, Eigen::MatrixXcd::Constant(1, 1, 2.0));
        const std::vector<Eigen::MatrixXcd> phi_ue(5, Eigen::MatrixXcd::Zero(1, 1));
        const Eigen::VectorXd b = bias_bound(h0, ht, Eigen::MatrixXcd::Constant(1, 1, 1.0), phi_u, phi_ue);
        CHECK(b.cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("scalar bias bound formula") {
        const Eigen::VectorXd omega = Eigen::VectorXd::LinSpaced(3, 0.1, 1.0);
        const auto h0 = constant_frf(omega, Eigen::MatrixXcd::Constant(1, 1, 1.5));
        const auto ht = constant_frf(omega, Eigen::MatrixXcd::Constant(1, 1, 1.0));
        const std::vector<Eigen::MatrixXcd> phi_u(3, Eigen::MatrixXcd::Constant(1, 1, 4.0));
        const std::vector<Eigen::MatrixXcd> phi_ue(3, Eigen::MatrixXcd::Constant(1, 1, 1.0));
        const Eigen::VectorXd b = bias_bound(h0, ht, Eigen::MatrixXcd::Constant(1, 1, 2.0), phi_u, phi_ue);
        const double ref = 0.5 * std::sqrt(2.0 / 4.0) * std::sqrt(1.0 / 4.0);
        for (int k = 0; k < 3; ++k) CHECK(b[k] == doctest::Approx(ref).epsilon(1e-12));
    }

    TEST_CASE("residual noise spectrum is a Schur complement") {
        Eigen::MatrixXcd l0(1, 1), peu(1, 1), pu(1, 1);
        l0 << 3.0;
        peu << Complex(1.0, 1.0);
        pu << 4.0;
        CHECK(std::abs(residual_noise_spectrum(l0, peu, pu)(0, 0) - 2.5) < 1e-14);
        CHECK(std::abs(residual_noise_spectrum(l0, Eigen::MatrixXcd::Zero(1, 1), pu)(0, 0) - 3.0) == 0.0);
    }

    TEST_CASE("singular value extremes") {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
        m(0, 0) = 3.0;
        m(1, 1) = Complex(0.0, -0.5);
        CHECK(max_singular_value(m) == doctest::Approx(3.0));
        CHECK(min_singular_value(m) == doctest::Approx(0.5));
    }
}
