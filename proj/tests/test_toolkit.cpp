#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "loadid/config.hpp"
#include "loadid/error.hpp"
#include "loadid/pipeline.hpp"
#include "loadid/series_io.hpp"

using namespace loadid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("loadid_unit_" + name);
    fs::remove_all(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LOADID_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

sim::MeasurementSeries constant_series(int rows) {
    sim::MeasurementSeries s;
    s.ts = 0.01;
    s.time = Eigen::VectorXd::LinSpaced(rows, 0.0, 0.01 * (rows - 1));
    s.values.resize(rows, sim::MeasurementSeries::kColumns);
    s.values.rowwise() = Eigen::RowVectorXd::LinSpaced(sim::MeasurementSeries::kColumns, 1.0, 1.7);
    return s;
}

}  // namespace

TEST_SUITE("toolkit_cli") {
    TEST_CASE("config text round-trips") {
        cfg::ExperimentConfig c;
        c.scenario.external_bus = 5;
        c.scenario.external.variance = 0.01;
        c.ident.method = cfg::Method::Tm;
        c.ident.explicit_init["X"] = 3.5;
        const std::string text = cfg::format_config(c);
        CHECK(cfg::format_config(cfg::parse_config(text)) == text);
    }

    TEST_CASE("unknown config key is rejected") {
        CHECK_THROWS_AS(cfg::parse_config("scenario.bogus = 1\n"), ConfigError);
    }

    TEST_CASE("series CSV round-trips exactly") {
        const cfg::ExperimentConfig c;
        const sim::MeasurementSeries s = sim::simulate(app::build_equilibrium(c), c.scenario);
        const sim::MeasurementSeries r = io::series_from_table(io::parse_table(io::table_text(io::series_table(s))));
        CHECK(r.rows() == s.rows());
        CHECK((r.values - s.values).cwiseAbs().maxCoeff() == 0.0);
        CHECK((r.time - s.time).cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("malformed table reports its line") {
        try {
            io::parse_table("time,V\n0,1\n0.01,abc\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("3") != std::string::npos);
        }
    }

    TEST_CASE("simulate writes 501 samples and is repeatable") {
        const fs::path a = scratch("sim_a");
        const fs::path b = scratch("sim_b");
        const cfg::ExperimentConfig c;
        app::cmd_simulate(c, a.string());
        app::cmd_simulate(c, b.string());
        CHECK(io::read_series((a / "series.csv").string()).rows() == 501);
        CHECK(io::read_text((a / "series.csv").string()) == io::read_text((b / "series.csv").string()));
        fs::remove_all(a);
        fs::remove_all(b);
    }

    TEST_CASE("zero-noise simulation has flat deltas") {
        cfg::ExperimentConfig c;
        c.scenario.internal.variance = 0.0;
        const sim::MeasurementSeries s = sim::detrend(sim::simulate(app::build_equilibrium(c), c.scenario));
        CHECK(s.values.cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("missing case file fails before writing outputs") {
        cfg::ExperimentConfig c;
        c.case_file = "/nonexistent/none.case";
        const fs::path out = scratch("missing_case");
        CHECK_THROWS_AS(app::cmd_simulate(c, out.string()), ConfigError);
        CHECK_FALSE(fs::exists(out / "series.csv"));
        fs::remove_all(out);
    }

    // Two constant channels are collinear, so even the order-one block is singular.
    TEST_CASE("constant series is not exciting and not informative") {
        const cfg::ExperimentConfig c;
        const auto eq = app::build_equilibrium(c);
        const app::DiagnosticsResult d = app::run_diagnostics(c, eq, constant_series(350));
        CHECK(d.pe.verified_order == 0);
        CHECK_FALSE(d.info.informative);
    }

    TEST_CASE("external-dominant record is flagged feedforward-dominant") {
        cfg::ExperimentConfig c;
        c.scenario.internal.variance = 0.0;
        c.scenario.external_bus = 5;
        c.scenario.external.variance = 0.002;
        const auto eq = app::build_equilibrium(c);
        const auto w = app::analysis_window(c, sim::simulate(eq, c.scenario));
        const app::DiagnosticsResult d = app::run_diagnostics(c, eq, w);
        REQUIRE(d.pitfall.has_value());
        CHECK(d.pitfall->regime == "feedforward-dominant");
        CHECK_FALSE(d.pitfall->k_explains);
        CHECK(d.verdict.find("feedforward-dominant") != std::string::npos);
    }

    TEST_CASE("command-line exit codes") {
        const fs::path out = scratch("cli");
        CHECK(run_cli("--bogus") == 2);
        CHECK(run_cli("--out " + out.string() + " diagnose --series /nonexistent.csv") != 0);
        fs::create_directories(out);
        io::write_text((out / "bad.cfg").string(), "scenario.ts = -1\n");
        CHECK(run_cli("--config " + (out / "bad.cfg").string() + " simulate") == 2);
        CHECK(run_cli("--out " + out.string() + " simulate") == 0);
        CHECK(fs::exists(out / "series.csv"));
        fs::remove_all(out);
    }
}
