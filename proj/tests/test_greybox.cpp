#include <doctest.h>

#include <cmath>
#include <random>

#include "loadid/greybox.hpp"
#include "loadid/identify.hpp"
#include "loadid/pipeline.hpp"

using namespace loadid;
using namespace loadid::pem;

namespace {

GreyBoxContinuous diagonal_model(double a) {
    GreyBoxContinuous c;
    c.A = a * Mat3::Identity();
    c.B << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
    c.C = Mat23::Zero();
    c.C(0, 0) = 1.0;
    c.C(1, 2) = 1.0;
    c.D = Mat2::Zero();
    c.G = Eigen::Vector3d(0.0, 0.0, 1.0);
    c.H = Eigen::Vector2d::Zero();
    return c;
}

// Scalar state driven by noise, observed through the first output.
GreyBoxDiscrete scalar_discrete(double a) {
    GreyBoxDiscrete d;
    d.Ad = Mat3::Zero();
    d.Ad(0, 0) = a;
    d.Ad(1, 1) = 0.2;
    d.Ad(2, 2) = 0.3;
    d.Bd = Mat32::Zero();
    d.Cd = Mat23::Zero();
    d.Cd(0, 0) = 1.0;
    d.Dd = Mat2::Zero();
    d.Gd = Eigen::Vector3d(1.0, 0.0, 0.0);
    d.Hd = Eigen::Vector2d::Zero();
    d.ts = 0.01;
    return d;
}

NoiseConfig scalar_noise(double q, double r) {
    NoiseConfig n;
    n.channel = NoiseChannel::Custom;
    n.Q = Eigen::MatrixXd::Constant(1, 1, q);
    n.R = r * Mat2::Identity();
    n.N = Eigen::MatrixXd::Zero(1, 2);
    n.G_custom = Eigen::Vector3d(1.0, 0.0, 0.0);
    n.H_custom = Eigen::Vector2d::Zero();
    return n;
}

const sim::SystemEquilibrium& equilibrium() {
    static const sim::SystemEquilibrium eq = app::build_equilibrium(cfg::ExperimentConfig());
    return eq;
}

// Open-loop record from the discrete innovation-form model itself.
IdentData open_loop_record(const LoadParameters& p, const NoiseConfig& noise, int n, std::uint64_t seed) {
    IdentData d;
    d.v0 = p.V0;
    d.ts = 0.01;
    const GreyBoxDiscrete disc = discretize_zoh(assemble_continuous(p, noise), d.ts);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    d.u.resize(n, 2);
    d.y.resize(n, 2);
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (int k = 0; k < n; ++k) {
        const Eigen::Vector2d u(1e-2 * g(rng), 1e-2 * g(rng));
        const Eigen::VectorXd w = std::sqrt(noise.Q(0, 0)) * Eigen::VectorXd::Constant(1, g(rng));
        const Eigen::Vector2d v(std::sqrt(noise.R(0, 0)) * g(rng), std::sqrt(noise.R(1, 1)) * g(rng));
        d.u.row(k) = u.transpose();
        d.y.row(k) = (disc.Cd * x + disc.Dd * u + disc.Hd * w + v).transpose();
        x = disc.Ad * x + disc.Bd * u + disc.Gd * w;
    }
    return d;
}

}  // namespace

TEST_SUITE("pem_greybox") {
    TEST_CASE("integrator discretizes to a pure accumulator") {
        const GreyBoxDiscrete d = discretize_zoh(diagonal_model(0.0), 0.01);
        CHECK((d.Ad - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((d.Bd - 0.01 * diagonal_model(0.0).B).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((d.Gd - 0.01 * diagonal_model(0.0).G).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("stable diagonal model matches the closed form") {
        const double a = -2.0;
        const double ts = 0.05;
        const GreyBoxDiscrete d = discretize_zoh(diagonal_model(a), ts);
        const double e = std::exp(a * ts);
        CHECK((d.Ad - e * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((d.Bd - (e - 1.0) / a * diagonal_model(a).B).cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("scalar DARE matches the quadratic root") {
        const double a = 0.9, q = 0.5, r = 0.2;
        const InnovationPredictor pred = solve_dare(scalar_discrete(a), scalar_noise(q, r));
        const double b = r - a * a * r - q;
        const double p = 0.5 * (-b + std::sqrt(b * b + 4.0 * q * r));
        CHECK(pred.P(0, 0) == doctest::Approx(p).epsilon(1e-12));
        CHECK(pred.Kd(0, 0) == doctest::Approx(a * p / (p + r)).epsilon(1e-12));
        CHECK(pred.spectral_radius < 1.0);
    }

    TEST_CASE("zero process noise gives zero covariance") {
        const InnovationPredictor pred = solve_dare(scalar_discrete(0.9), scalar_noise(0.0, 0.2));
        CHECK(pred.P.cwiseAbs().maxCoeff() < 1e-14);
        CHECK(pred.Kd.cwiseAbs().maxCoeff() < 1e-14);
    }

    TEST_CASE("load model DARE solution is a Riccati fixed point") {
        const NoiseConfig noise = NoiseConfig::make(NoiseChannel::Torque);
        const GreyBoxDiscrete d = discretize_zoh(assemble_continuous(equilibrium().load, noise), 0.01);
        const InnovationPredictor pred = solve_dare(d, noise);
        const Mat3 next = riccati_map(pred.P, d, noise);
        CHECK((next - pred.P).cwiseAbs().maxCoeff() <= 1e-10 * pred.P.cwiseAbs().maxCoeff());
        CHECK((pred.P - pred.P.transpose()).cwiseAbs().maxCoeff() < 1e-14 * pred.P.cwiseAbs().maxCoeff());
        CHECK(pred.spectral_radius < 1.0);
    }

    TEST_CASE("channel patterns") {
        const LoadParameters p = equilibrium().load;
        const GreyBoxContinuous t = assemble_continuous(p, NoiseConfig::make(NoiseChannel::Torque));
        const GreyBoxContinuous e = assemble_continuous(p, NoiseConfig::make(NoiseChannel::EmfWrong));
        CHECK((t.G - Eigen::Vector3d(0.0, 0.0, 1.0 / p.Tj)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((e.G - Eigen::Vector3d(0.0, 1.0 / p.Td0p, 0.0)).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("loss is the mean squared residual norm") {
        Eigen::MatrixXd eps(3, 2);
        eps << 100.0, 100.0, 3.0, 4.0, 0.0, 5.0;
        CHECK(loss(eps, 1) == doctest::Approx(25.0));
        CHECK(loss(Eigen::MatrixXd::Zero(10, 2)) == 0.0);
    }

    TEST_CASE("fit percent extremes") {
        Eigen::MatrixXd y = Eigen::MatrixXd::Random(50, 2);
        CHECK(fit_percent(y, y)[0] == doctest::Approx(100.0));
        const Eigen::MatrixXd mean = y.colwise().mean().replicate(50, 1);
        CHECK(fit_percent(y, mean)[1] == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("noise-free data keeps the true parameters") {
        const LoadParameters truth = equilibrium().load;
        NoiseConfig noise = NoiseConfig::make(NoiseChannel::Torque, 0.002, 1e-8);
        IdentData d = open_loop_record(truth, noise, 1500, 7);
        d.y = simulate_model(truth, d);
        IdentOptions opt;
        opt.restarts = 0;
        const IdentResult r = identify_output_error(d, truth, ParameterBounds::around(truth), opt);
        for (const char* name : {"X", "Xp", "Td0p", "Tj", "s0"}) {
            const int i = LoadParameters::index_of(name);
            CHECK(std::abs(r.estimate.get(i) / truth.get(i) - 1.0) < 1e-6);
        }
        CHECK(r.loss < 1e-20);
    }

    TEST_CASE("open-loop data recovers perturbed parameters") {
        const LoadParameters truth = equilibrium().load;
        const NoiseConfig noise = NoiseConfig::make(NoiseChannel::Torque, 0.002, 1e-8);
        const IdentData d = open_loop_record(truth, noise, 3000, 11);
        LoadParameters init = truth;
        init.X *= 1.2;
        init.Xp *= 0.8;
        init.Td0p *= 1.25;
        init.Tj *= 0.8;
        init.s0 *= 1.2;
        const IdentResult r = identify(d, init, ParameterBounds::around(init), noise);
        const app::RecoveryCheck c = app::pem_a_recovery(r.estimate, truth);
        INFO(c.detail);
        CHECK(c.pass);
        CHECK(r.loss <= r.initial_loss);
    }
}
