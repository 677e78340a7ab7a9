#include <doctest.h>

#include <cmath>
#include <random>

#include "loadid/closed_loop.hpp"
#include "loadid/pipeline.hpp"

using namespace loadid;

namespace {

const sim::SystemEquilibrium& equilibrium() {
    static const sim::SystemEquilibrium eq = app::build_equilibrium(cfg::ExperimentConfig());
    return eq;
}

Eigen::Matrix2d expand(Complex z) {
    Eigen::Matrix2d m;
    m << z.real(), -z.imag(), z.imag(), z.real();
    return m;
}

double rel_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace

TEST_SUITE("closed_loop") {
    TEST_CASE("generator FRF equals its state-space formula") {
        const auto& eq = equilibrium();
        const int gi = 0;
        const int bus = eq.system.generator_buses()[gi];
        const Complex emf = std::polar(eq.system.generator_emf()[gi], eq.system.generator_angles0()[gi]);
        const double xdp = eq.system.generator_xdp()[gi];
        const loop::GeneratorModel g = loop::generator_model(emf, eq.bus_voltage[bus], xdp,
                                                             eq.system.generator_tj()[gi],
                                                             eq.system.generator_damping()[gi], eq.system.ws());
        for (double w : {0.0, 0.3, 2.0, 40.0}) {
            const Eigen::Matrix2cd direct =
                g.D.cast<Complex>() +
                g.C.cast<Complex>() *
                    (Complex(0.0, w) * Eigen::Matrix2cd::Identity() - g.A.cast<Complex>()).inverse() *
                    g.B.cast<Complex>();
            CHECK(rel_diff(loop::generator_frf(g, w), direct) < 1e-12);
        }
        // Far above the swing mode the machine is a fixed emf behind x'd.
        const Eigen::Matrix2d hf = expand(Complex(0.0, 1.0 / xdp));
        CHECK((loop::generator_frf(g, 1e9) - hf.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("network reduction matches its state-space realization") {
        const auto& eq = equilibrium();
        const Eigen::VectorXd omega = log_grid(0.01, 10.0, 25);
        const loop::NetworkReduction red = loop::reduce_to_load(eq, omega);
        const loop::StateSpace ss = loop::network_state_space(eq);
        for (int k = 0; k < omega.size(); ++k)
            CHECK(rel_diff(red.K.values[k], loop::frequency_response(ss, omega[k])) < 1e-9);
    }

    TEST_CASE("load FRF matches its state-space realization") {
        const auto& eq = equilibrium();
        const Eigen::VectorXd omega = log_grid(0.01, 10.0, 25);
        const FrequencyResponse g = loop::load_frf(eq.load, omega);
        const loop::StateSpace ss = loop::load_state_space(eq.load);
        for (int k = 0; k < omega.size(); ++k)
            CHECK(rel_diff(g.values[k], loop::frequency_response(ss, omega[k])) < 1e-9);
    }

    TEST_CASE("load FRF limits") {
        const LoadParameters& p = equilibrium().load;
        const Complex yz = Complex(p.Pz, -p.Qz) / (p.V0 * p.V0);
        Eigen::VectorXd omega(2);
        omega << 0.1, 5.0;
        const FrequencyResponse z = loop::load_frf(p, omega, false);
        for (const auto& v : z.values) CHECK((v - expand(yz).cast<Complex>()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::VectorXd hi(1);
        hi << 1e9;
        const FrequencyResponse g = loop::load_frf(p, hi);
        const Eigen::Matrix2d ref = expand(yz + Complex(0.0, -1.0 / p.Xp));
        CHECK((g.values[0] - ref.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("closed-loop response limits and mixed spectra") {
        const auto& eq = equilibrium();
        const Eigen::VectorXd omega = log_grid(0.05, 5.0, 15);
        const int ext = 5;
        const loop::NetworkReduction red = loop::reduce_to_load(eq, omega, ext);
        REQUIRE(red.Kh.has_value());
        const LoadParameters sysp = eq.load.rotated(std::arg(eq.bus_voltage[eq.network.index_of(eq.motor_bus_id)]));
        const FrequencyResponse g = loop::load_frf(sysp, omega);
        const FrequencyResponse hi = loop::load_noise_frf(sysp, pem::NoiseConfig::make(pem::NoiseChannel::Torque), omega);
        const int n = static_cast<int>(omega.size());
        const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);

        const FrequencyResponse only_i = loop::closed_loop_response(red.K, *red.Kh, g, hi, one, zero);
        const FrequencyResponse only_h = loop::closed_loop_response(red.K, *red.Kh, g, hi, zero, one);
        for (int k = 0; k < n; ++k) {
            CHECK(rel_diff(only_i.values[k], red.K.values[k]) < 1e-8);
            CHECK(rel_diff(only_h.values[k], g.values[k]) < 1e-8);
        }

        // dI = G dV + Hi xi_i = K dV + Kh xi_h.
        const Eigen::VectorXd phi_i = Eigen::VectorXd::Constant(n, 0.7);
        const Eigen::VectorXd phi_h = Eigen::VectorXd::Constant(n, 1.9);
        const FrequencyResponse mixed = loop::closed_loop_response(red.K, *red.Kh, g, hi, phi_i, phi_h);
        for (int k = 0; k < n; ++k) {
            const Eigen::MatrixXcd& K = red.K.values[k];
            const Eigen::MatrixXcd& Kh = red.Kh->values[k];
            const Eigen::MatrixXcd Mi = (g.values[k] - K).inverse();
            const Eigen::MatrixXcd phi_v =
                Mi * (phi_h[k] * Kh * Kh.adjoint() + phi_i[k] * hi.values[k] * hi.values[k].adjoint()) * Mi.adjoint();
            const Eigen::MatrixXcd phi_iv = K * phi_v + phi_h[k] * Kh * Kh.adjoint() * Mi.adjoint();
            CHECK(rel_diff(mixed.values[k], phi_iv * phi_v.inverse()) < 1e-8);
        }
    }

    TEST_CASE("superposition parts add up to the joint response") {
        const auto& eq = equilibrium();
        const sim::LinearSystem ss = sim::linearize_system(eq, 5);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> n(0.0, 1e-2);
        Eigen::VectorXd xi(300), xh(300);
        for (int i = 0; i < 300; ++i) { xi[i] = n(rng); xh[i] = n(rng); }
        const loop::Superposition sp = loop::superposition_decompose(ss, xi, xh, 0.002);
        Eigen::MatrixXd d(300, 2);
        d << xi, xh;
        const Eigen::MatrixXd y = sim::simulate_linear(ss, d, 0.002);
        const Eigen::MatrixXd v = y.middleCols(sim::MeasurementSeries::Vx, 2);
        const Eigen::MatrixXd i = y.middleCols(sim::MeasurementSeries::Ix, 2);
        CHECK((sp.v_i + sp.v_h - v).cwiseAbs().maxCoeff() <= 1e-10 * v.cwiseAbs().maxCoeff());
        CHECK((sp.i_i + sp.i_h - i).cwiseAbs().maxCoeff() <= 1e-10 * i.cwiseAbs().maxCoeff());
    }

    TEST_CASE("FOH simulation of a static gain is exact") {
        loop::StateSpace ss;
        ss.A = -Eigen::MatrixXd::Identity(1, 1);
        ss.B = Eigen::MatrixXd::Zero(1, 2);
        ss.C = Eigen::MatrixXd::Zero(2, 1);
        ss.D = 2.0 * Eigen::MatrixXd::Identity(2, 2);
        const Eigen::MatrixXd u = Eigen::MatrixXd::Random(20, 2);
        CHECK((loop::simulate_foh(ss, u, 0.01) - 2.0 * u).cwiseAbs().maxCoeff() < 1e-14);
    }
}
