#include <doctest.h>

#include <cmath>
#include <random>

#include "loadid/error.hpp"
#include "loadid/grid.hpp"

using namespace loadid;
using namespace loadid::grid;

namespace {

const char* kTwoBus = R"(
[bus]
1 slack 1.0 0.0
2 pq 1.0 0.0
[branch]
1 2 0.01 0.1 0.0
[gen]
1 10.0 0.1 0.0
)";

// Gauss-Seidel fixed point on the same admittance, independent of Newton.
Eigen::VectorXcd gauss_seidel(const NetworkCase& c, double tol) {
    const Eigen::MatrixXcd y = build_admittance(c, false).y;
    const int n = c.size();
    Eigen::VectorXcd v(n);
    Eigen::VectorXcd s(n);
    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses[i];
        v[i] = b.type == BusType::PQ ? 1.0 : b.v_set;
        s[i] = Complex(b.type == BusType::PV ? b.p_gen : 0.0, 0.0) - c.load_at(b.id);
    }
    for (int it = 0; it < 200000; ++it) {
        double step = 0.0;
        for (int i = 0; i < n; ++i) {
            const Bus& b = c.buses[i];
            if (b.type == BusType::Slack) continue;
            Complex si = s[i];
            if (b.type == BusType::PV) si = Complex(s[i].real(), -(std::conj(v[i]) * (y.row(i) * v)(0)).imag());
            Complex sum = 0.0;
            for (int k = 0; k < n; ++k) {
                if (k != i) sum += y(i, k) * v[k];
            }
            Complex vn = (std::conj(si / v[i]) - sum) / y(i, i);
            if (b.type == BusType::PV) vn = std::polar(b.v_set, std::arg(vn));
            step = std::max(step, std::abs(vn - v[i]));
            v[i] = vn;
        }
        if (step < tol) return v;
    }
    throw ConvergenceError("Gauss-Seidel oracle did not converge");
}

}  // namespace

TEST_SUITE("grid_core") {
    TEST_CASE("bundled case parses with the motor at bus 6") {
        const NetworkCase c = bundled_case();
        CHECK(c.size() == 9);
        CHECK(c.generators.size() == 3);
        REQUIRE(c.motor_load() != nullptr);
        CHECK(c.motor_load()->bus == 6);
    }

    TEST_CASE("minimal two-bus case") {
        const NetworkCase c = load_case(kTwoBus);
        CHECK(c.size() == 2);
        CHECK(c.branches.size() == 1);
    }

    TEST_CASE("dangling branch reference is rejected") {
        const std::string text = std::string(kTwoBus) + "[branch]\n1 99 0.0 0.1 0.0\n";
        CHECK_THROWS_AS(load_case(text), ValidationError);
    }

    TEST_CASE("case text round-trips through format_case") {
        const NetworkCase a = bundled_case();
        const NetworkCase b = load_case(format_case(a));
        CHECK(b.size() == a.size());
        CHECK(b.branches.size() == a.branches.size());
        CHECK(format_case(b) == format_case(a));
    }

    TEST_CASE("single branch admittance") {
        const NetworkCase c = load_case(kTwoBus);
        const Eigen::MatrixXcd y = build_admittance(c, false).y;
        const Complex ys = 1.0 / Complex(0.01, 0.1);
        CHECK(std::abs(y(0, 0) - ys) < 1e-14);
        CHECK(std::abs(y(0, 1) + ys) < 1e-14);
        CHECK(std::abs(y(1, 0) + ys) < 1e-14);
        CHECK(std::abs(y(1, 1) - ys) < 1e-14);
    }

    TEST_CASE("bundled admittance matches a stamp-by-stamp construction") {
        const NetworkCase c = bundled_case();
        const AdmittanceMatrix a = build_admittance(c, false);
        Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(9, 9);
        for (const auto& br : c.branches) {
            Eigen::MatrixXcd stamp = Eigen::MatrixXcd::Zero(9, 9);
            const int i = c.index_of(br.from);
            const int k = c.index_of(br.to);
            const Complex ys = Complex(br.r, -br.x) / (br.r * br.r + br.x * br.x);
            stamp(i, i) = ys + Complex(0.0, 0.5 * br.b);
            stamp(k, k) = ys + Complex(0.0, 0.5 * br.b);
            stamp(i, k) = stamp(k, i) = -ys;
            ref += stamp;
        }
        for (const auto& b : c.buses) ref(c.index_of(b.id), c.index_of(b.id)) += Complex(0.0, b.b_shunt);
        CHECK((a.y - ref).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("series-only network has zero row sums") {
        NetworkCase c = bundled_case();
        for (auto& br : c.branches) br.b = 0.0;
        for (auto& b : c.buses) b.b_shunt = 0.0;
        const Eigen::MatrixXcd y = build_admittance(c, false).y;
        CHECK(y.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("two-bus case without load solves flat") {
        const PowerFlowSolution pf = solve_power_flow(load_case(kTwoBus));
        CHECK((pf.vm.array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(pf.va.cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("bundled power flow agrees with Gauss-Seidel") {
        const NetworkCase c = bundled_case();
        PowerFlowOptions opt;
        opt.tolerance = 1e-12;
        const PowerFlowSolution pf = solve_power_flow(c, opt);
        const Eigen::VectorXcd gs = gauss_seidel(c, 1e-12);
        CHECK((pf.voltage() - gs).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("solved case has negligible mismatch") {
        const NetworkCase c = bundled_case();
        const PowerFlowSolution pf = solve_power_flow(c);
        const Eigen::VectorXcd s = power_injections(build_admittance(c, false).y, pf.voltage());
        for (int i = 0; i < c.size(); ++i) {
            const Bus& b = c.buses[i];
            const Complex sched = Complex(b.type == BusType::PV ? b.p_gen : 0.0, 0.0) - c.load_at(b.id);
            if (b.type != BusType::Slack) CHECK(std::abs(s[i].real() - sched.real()) < 1e-8);
            if (b.type == BusType::PQ) CHECK(std::abs(s[i].imag() - sched.imag()) < 1e-8);
        }
    }

    TEST_CASE("expand_real blocks") {
        Eigen::MatrixXcd j(1, 1), one(1, 1);
        j(0, 0) = Complex(0.0, 1.0);
        one(0, 0) = 1.0;
        Eigen::Matrix2d ej, e1;
        ej << 0, -1, 1, 0;
        e1 << 1, 0, 0, 1;
        CHECK((expand_real(j) - ej).cwiseAbs().maxCoeff() == 0.0);
        CHECK((expand_real(one) - e1).cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("expand_real multiplication matches complex product") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n(0.0, 1.0);
        Eigen::MatrixXcd y(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) y(i, k) = Complex(n(rng), n(rng));
        const Eigen::MatrixXd yr = expand_real(y);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            Eigen::VectorXcd v(3);
            for (int i = 0; i < 3; ++i) v[i] = Complex(n(rng), n(rng));
            worst = std::max(worst, (stack_real(y * v) - yr * stack_real(v)).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-12);
        Eigen::VectorXcd v(3);
        v << Complex(1, 2), Complex(-3, 0.5), Complex(0, -1);
        CHECK((unstack_real(stack_real(v)) - v).cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("missing case file is rejected") {
        CHECK_THROWS_AS(load_case_file("/nonexistent/dir/none.case"), ValidationError);
    }
}
