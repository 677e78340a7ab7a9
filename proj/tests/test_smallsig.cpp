#include <doctest.h>

#include <cmath>
#include <random>

#include "loadid/pipeline.hpp"
#include "loadid/smallsig.hpp"

using namespace loadid;

namespace {

const sim::SystemEquilibrium& equilibrium() {
    static const sim::SystemEquilibrium eq = app::build_equilibrium(cfg::ExperimentConfig());
    return eq;
}

Eigen::MatrixXd random_input(int rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1e-3);
    Eigen::MatrixXd d(rows, 2);
    for (int i = 0; i < rows; ++i) d.row(i) << n(rng), n(rng);
    return d;
}

}  // namespace

TEST_SUITE("smallsig_sim") {
    TEST_CASE("equilibrium is a fixed point") {
        const auto& eq = equilibrium();
        CHECK(eq.residual < 1e-9);
        const Eigen::VectorXd f = eq.system.rhs(eq.x0, 0.0, -1, 0.0);
        CHECK(f.cwiseAbs().maxCoeff() < 1e-9);
    }

    TEST_CASE("load-bus equilibrium matches the reference operating point") {
        const auto& eq = equilibrium();
        const LoadParameters ref;
        CHECK(std::abs(eq.load.s0 - ref.s0) < 1e-2);
        CHECK(std::abs(eq.load.Exp0 - ref.Exp0) < 1e-2);
        CHECK(std::abs(eq.load.Eyp0 - ref.Eyp0) < 1e-2);
        CHECK(std::abs(eq.load.X - ref.X) < 1e-2);
        CHECK(std::abs(eq.load.Xp - ref.Xp) < 1e-2);
    }

    TEST_CASE("zero-noise simulation stays at equilibrium") {
        cfg::ExperimentConfig c;
        c.scenario.internal.variance = 0.0;
        c.scenario.external.variance = 0.0;
        const sim::MeasurementSeries s = sim::simulate(equilibrium(), c.scenario);
        CHECK(s.rows() == c.scenario.sample_count());
        const Eigen::VectorXd y0 = equilibrium().outputs0();
        double worst = 0.0;
        for (int i = 0; i < s.rows(); ++i) worst = std::max(worst, (s.values.row(i).transpose() - y0).cwiseAbs().maxCoeff());
        CHECK(worst < 1e-8);
    }

    TEST_CASE("simulation is deterministic for a fixed seed") {
        const cfg::ExperimentConfig c;
        const sim::MeasurementSeries a = sim::simulate(equilibrium(), c.scenario);
        const sim::MeasurementSeries b = sim::simulate(equilibrium(), c.scenario);
        CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("linear propagation is superposable and homogeneous") {
        const sim::LinearSystem ss = sim::linearize_system(equilibrium(), 5);
        const Eigen::MatrixXd d1 = random_input(400, 1);
        const Eigen::MatrixXd d2 = random_input(400, 2);
        const double dt = 0.002;
        const Eigen::MatrixXd y1 = sim::simulate_linear(ss, d1, dt, 5);
        const Eigen::MatrixXd y2 = sim::simulate_linear(ss, d2, dt, 5);
        const Eigen::MatrixXd y12 = sim::simulate_linear(ss, d1 + d2, dt, 5);
        const Eigen::MatrixXd y3 = sim::simulate_linear(ss, 3.0 * d1, dt, 5);
        const double scale = y12.cwiseAbs().maxCoeff();
        CHECK((y12 - y1 - y2).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        CHECK((y3 - 3.0 * y1).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        CHECK(y1.rows() == 80);
    }

    TEST_CASE("linearized state matrix is stable") {
        const Eigen::VectorXcd ev = sim::eigenvalues(sim::linearize_system(equilibrium()));
        CHECK(ev.real().maxCoeff() < 1e-9);
    }

    TEST_CASE("detrend removes column means") {
        sim::MeasurementSeries s;
        s.ts = 0.01;
        s.time = Eigen::VectorXd::LinSpaced(50, 0.0, 0.49);
        s.values = Eigen::MatrixXd::Random(50, sim::MeasurementSeries::kColumns).array() + 4.0;
        const Eigen::VectorXd mean = s.values.colwise().mean().transpose();
        const sim::MeasurementSeries d = sim::detrend(s);
        CHECK(d.detrended);
        CHECK(d.values.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
        CHECK((d.means - mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((d.values.rowwise() + mean.transpose() - s.values).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("window selects half-open time range") {
        const cfg::ExperimentConfig c;
        const sim::MeasurementSeries raw = sim::simulate(equilibrium(), c.scenario);
        const sim::MeasurementSeries w = raw.window(1.5, 5.0);
        CHECK(w.rows() == 350);
        CHECK(w.time[0] == doctest::Approx(1.5));
    }

    TEST_CASE("nrmse of identical signals is zero") {
        const Eigen::MatrixXd a = Eigen::MatrixXd::Random(20, 2);
        CHECK(sim::nrmse(a, a) == 0.0);
        CHECK(sim::nrmse(2.0 * a, a) == doctest::Approx(1.0));
    }
}
