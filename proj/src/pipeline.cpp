#include "loadid/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <atomic>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "loadid/error.hpp"
#include "loadid/series_io.hpp"

namespace loadid::app {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

double rel_err(double est, double truth) { return truth != 0.0 ? est / truth - 1.0 : est - truth; }

pem::NoiseConfig noise_for(const cfg::ExperimentConfig& c, cfg::Method m) {
    const auto ch = m == cfg::Method::PemB ? pem::NoiseChannel::EmfWrong : pem::NoiseChannel::Torque;
    return pem::NoiseConfig::make(ch, c.ident.q, c.ident.r);
}

std::vector<std::pair<std::string, std::string>> provenance(const cfg::ExperimentConfig& c) {
    const auto& s = c.scenario;
    return {{"seed", "internal=" + std::to_string(s.internal.seed) + " external=" + std::to_string(s.external.seed) +
                         " measurement=" + std::to_string(s.measurement_seed)}};
}

// Runs `f`, prefixing any toolkit error with the stage name.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const IdentificationError& e) {
        throw IdentificationError(std::string("stage ") + name + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw IdentificationError(std::string("stage ") + name + ": " + e.what());
    } catch (const Error& e) {
        throw SimulationError(std::string("stage ") + name + ": " + e.what());
    }
}

io::Table pe_table(const diag::PEReport& r) {
    io::Table t;
    t.header = {{"threshold", io::format_number(r.threshold)}, {"verified_order", std::to_string(r.verified_order)}};
    t.columns = {"order", "condition", "log10_det"};
    t.values.resize(static_cast<Eigen::Index>(r.orders.size()), 3);
    for (std::size_t k = 0; k < r.orders.size(); ++k) {
        t.values(k, 0) = r.orders[k];
        t.values(k, 1) = r.condition[k];
        t.values(k, 2) = r.log10_det[k];
    }
    return t;
}

io::Table info_table(const diag::InformativenessReport& r) {
    io::Table t;
    t.header = {{"eig_ratio_floor", io::format_number(r.floor)}, {"informative", r.informative ? "1" : "0"}};
    t.columns = {"freq_hz", "eig_ratio"};
    t.values.resize(r.freq_hz.size(), 2);
    t.values.col(0) = r.freq_hz;
    t.values.col(1) = r.ratio;
    return t;
}

io::Table pitfall_table(const loop::PitfallReport& r) {
    io::Table t;
    t.header = {{"nrmse", io::format_number(r.nrmse)}, {"regime", r.regime}};
    t.columns = {"freq_hz", "coherence", "resid_k", "resid_g"};
    t.values.resize(r.freq_hz.size(), 4);
    t.values << r.freq_hz, r.coherence, r.resid_k, r.resid_g;
    return t;
}

io::Table overlay_table(const loop::PitfallReport& r, const Eigen::VectorXd& time) {
    io::Table t;
    t.header = {{"content", "measured load current deltas against K- and G-filtered voltage deltas"}};
    t.columns = {"time", "Ix", "Ix_K", "Ix_G", "Iy", "Iy_K", "Iy_G"};
    t.values.resize(time.size(), 7);
    t.values << time, r.current.col(0), r.k_filtered.col(0), r.g_filtered.col(0), r.current.col(1),
        r.k_filtered.col(1), r.g_filtered.col(1);
    return t;
}

void write_diagnostics(const DiagnosticsResult& d, const sim::MeasurementSeries& w, const std::string& out) {
    io::write_text(path_in(out, "pe.csv"), io::table_text(pe_table(d.pe)));
    io::write_text(path_in(out, "informativeness.csv"), io::table_text(info_table(d.info)));
    if (d.pitfall) {
        io::write_text(path_in(out, "pitfall.csv"), io::table_text(pitfall_table(*d.pitfall)));
        io::write_text(path_in(out, "fig4_overlay.csv"), io::table_text(overlay_table(*d.pitfall, w.time)));
    }
    io::write_text(path_in(out, "diagnostics.txt"), d.verdict);
}

std::string param_line(const char* name, double truth, double est) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-5s true %10.5f  est %12.5f  rel %+9.3f\n", name, truth, est, rel_err(est, truth));
    return buf;
}

io::Table trace_table(const pem::IdentResult& r) {
    io::Table t;
    t.header = {{"method", r.label}};
    t.columns = {"iteration", "loss"};
    t.values.resize(static_cast<Eigen::Index>(r.trace.size()), 2);
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        t.values(k, 0) = static_cast<double>(k);
        t.values(k, 1) = r.trace[k];
    }
    return t;
}

std::string flags_for(const pem::IdentResult& r, const LoadParameters& truth) {
    std::string out;
    for (int i = 0; i < 7; ++i) {
        const double e = rel_err(r.estimate.get(i), truth.get(i));
        if (std::abs(e) > 0.5) {
            out += std::string("  GROSS ERROR: ") + LoadParameters::kNames[i] + " off by " + fmt("%+.1f", 100.0 * e) + "%\n";
        }
    }
    for (const auto& b : r.at_bound) out += "  at bound: " + b + "\n";
    return out;
}

std::string ident_report(const cfg::ExperimentConfig& c, cfg::Method m, const pem::IdentResult& r,
                         const LoadParameters& truth, const LoadParameters& init) {
    std::ostringstream os;
    os << "method " << cfg::method_label(m) << " (" << r.method;
    if (m != cfg::Method::Tm) os << ", noise channel " << pem::channel_name(r.channel);
    os << ")\n";
    os << "status " << r.status << (r.converged ? " (converged)" : "") << ", start " << r.start_index
       << ", evaluations " << r.evaluations << "\n";
    os << "loss initial " << io::format_number(r.initial_loss) << " final " << io::format_number(r.loss) << "\n";
    os << "fit dP " << fmt("%.2f", r.fit[0]) << "%  dQ " << fmt("%.2f", r.fit[1]) << "%\n";
    os << "parameters (truth from the configured equilibrium, load-bus frame):\n";
    for (const auto& name : c.ident.free) {
        const int i = LoadParameters::index_of(name);
        os << param_line(LoadParameters::kNames[i], truth.get(i), r.estimate.get(i));
    }
    os << "initial guess:";
    for (const auto& name : c.ident.free) os << " " << name << "=" << fmt("%.5g", init.get(LoadParameters::index_of(name)));
    os << "\n";
    const std::string flags = flags_for(r, truth);
    if (!flags.empty()) os << "flags:\n" << flags;
    os << "starts:\n";
    for (const auto& l : r.restart_log) os << "  " << l << "\n";
    return os.str();
}

sim::MeasurementSeries prepare(const cfg::ExperimentConfig& c, const sim::MeasurementSeries& s) {
    return s.detrended ? s : analysis_window(c, s);
}

}  // namespace

sim::SystemEquilibrium build_equilibrium(const cfg::ExperimentConfig& c) {
    c.validate();
    const std::string path = c.resolved_case_path();
    const grid::NetworkCase net = path.empty() ? grid::bundled_case() : grid::load_case_file(path);
    grid::PowerFlowOptions opt;
    opt.tolerance = 1e-12;
    const grid::PowerFlowSolution pf = grid::solve_power_flow(net, opt);
    return sim::init_equilibrium(net, pf, c.motor);
}

sim::MeasurementSeries analysis_window(const cfg::ExperimentConfig& c, const sim::MeasurementSeries& raw) {
    const sim::MeasurementSeries w = raw.window(c.analysis_start, c.analysis_end);
    if (w.rows() < 2) throw ValidationError("analysis window holds fewer than two samples");
    return sim::detrend(w);
}

std::string equilibrium_report(const sim::SystemEquilibrium& eq) {
    std::ostringstream os;
    const auto& l = eq.load;
    const auto y0 = eq.outputs0();
    const auto& sys = eq.system;
    const int ng = sys.generator_count();
    const Complex e_sys(eq.x0[2 * ng], eq.x0[2 * ng + 1]);
    os << "equilibrium (motor at bus " << eq.motor_bus_id << ")\n";
    os << "  residual max|dx/dt|  " << fmt("%.3e", eq.residual) << "\n";
    os << "  V        " << fmt("%.10f", y0[sim::MeasurementSeries::V]) << "\n";
    os << "  theta    " << fmt("%.10f", y0[sim::MeasurementSeries::Theta]) << " rad\n";
    os << "  P        " << fmt("%.10f", y0[sim::MeasurementSeries::P]) << "\n";
    os << "  Q        " << fmt("%.10f", y0[sim::MeasurementSeries::Q]) << "\n";
    os << "  s0       " << fmt("%.10f", l.s0) << "\n";
    os << "  E'x0     " << fmt("%.10f", l.Exp0) << "  (load-bus frame)\n";
    os << "  E'y0     " << fmt("%.10f", l.Eyp0) << "  (load-bus frame)\n";
    os << "  E'       " << fmt("%.10f", e_sys.real()) << " " << fmt("%+.10f", e_sys.imag()) << "j  (system frame)\n";
    os << "  Tm       " << fmt("%.10f", sys.mechanical_torque()) << "\n";
    os << "  Pz, Qz   " << fmt("%.3e", l.Pz) << " " << fmt("%.3e", l.Qz) << "\n";
    os << "generators (bus, E, delta0, Pm)\n";
    for (int k = 0; k < ng; ++k) {
        os << "  " << eq.network.buses[sys.generator_buses()[k]].id << "  " << fmt("%.6f", sys.generator_emf()[k]) << "  "
           << fmt("%.6f", eq.x0[k]) << "  " << fmt("%.6f", sys.mechanical_power()[k]) << "\n";
    }
    os << "eigenvalues of the linearized system\n";
    const Eigen::VectorXcd ev = sim::eigenvalues(sim::linearize_system(eq));
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const double re = std::abs(ev[k].real()) < 1e-9 ? 0.0 : ev[k].real();
        const double im = std::abs(ev[k].imag()) < 1e-9 ? 0.0 : ev[k].imag();
        os << "  " << fmt("%+.6f", re) << " " << fmt("%+.6f", im) << "j\n";
    }
    return os.str();
}

DiagnosticsResult run_diagnostics(const cfg::ExperimentConfig& c, const sim::SystemEquilibrium& eq,
                                  const sim::MeasurementSeries& w) {
    const auto& g = c.diagnostics;
    DiagnosticsResult d;
    const Eigen::MatrixXd u = w.inputs();
    const int n_max = std::min(g.pe_max_order, static_cast<int>(u.rows() / 3));
    d.pe = diag::persistent_excitation_order(u, std::max(n_max, 1), g.pe_threshold);
    Eigen::MatrixXd z(w.rows(), 4);
    z << u, w.outputs();
    const int segment = std::min(g.segment, w.rows());
    const int overlap = std::min(g.overlap, segment - 1);
    d.info = diag::informativeness_test(diag::estimate_spectrum(z, w.ts, segment, overlap), g.band_low_hz,
                                        g.band_high_hz, g.eig_floor);
    try {
        d.pitfall = loop::validate_pitfall(eq, w, segment, g.pitfall_threshold, g.coherence);
    } catch (const Error& e) {
        d.pitfall_error = e.what();
    }
    std::ostringstream os;
    os << "diagnostics over " << w.rows() << " samples at ts = " << io::format_number(w.ts) << " s\n";
    os << "persistent excitation: verified order " << d.pe.verified_order << " (tested up to " << d.pe.orders.size()
       << ", condition threshold " << io::format_number(1.0 / d.pe.threshold) << ")\n";
    os << "informativeness: min eigenvalue ratio " << fmt("%.3e", d.info.min_ratio) << " over "
       << io::format_number(g.band_low_hz) << "-" << io::format_number(g.band_high_hz) << " Hz (floor "
       << io::format_number(g.eig_floor) << ") -> " << (d.info.informative ? "informative" : "NOT informative") << "\n";
    if (d.pitfall) {
        const auto& p = *d.pitfall;
        os << "closed-loop check: dI vs K*dV coherence-weighted NRMSE " << fmt("%.2f", 100.0 * p.nrmse)
           << "% (threshold " << fmt("%.0f", 100.0 * g.pitfall_threshold) << "%), " << p.closer_to_k << " of "
           << p.high_coherence_bins << " bins with coherence > " << io::format_number(p.coherence_threshold)
           << " closer to K than to G -> " << p.regime << "\n";
        if (p.k_explains) {
            os << "  the record obeys the network relation dI = K dV; regression of dI on dV identifies the network, "
                  "not the load\n";
        }
    } else {
        os << "closed-loop check unavailable: " << d.pitfall_error << "\n";
    }
    d.verdict = os.str();
    return d;
}

LoadParameters initial_guess(const cfg::ExperimentConfig& c, const LoadParameters& truth) {
    LoadParameters init = truth;
    switch (c.ident.init_mode) {
        case cfg::InitMode::Truth:
            break;
        case cfg::InitMode::Perturbed: {
            std::mt19937_64 rng(c.ident.init_seed);
            std::uniform_real_distribution<double> unit(-1.0, 1.0);
            for (const auto& name : c.ident.free) {
                const int i = LoadParameters::index_of(name);
                init.set(i, truth.get(i) * (1.0 + c.ident.perturbation * unit(rng)));
            }
            break;
        }
        case cfg::InitMode::Explicit:
            for (const auto& name : c.ident.free) {
                const auto it = c.ident.explicit_init.find(name);
                if (it == c.ident.explicit_init.end()) {
                    throw ConfigError("explicit initial value missing for free parameter " + name);
                }
                init.set(LoadParameters::index_of(name), it->second);
            }
            break;
    }
    return init;
}

pem::IdentResult run_method(const cfg::ExperimentConfig& c, cfg::Method m, const pem::IdentData& data,
                            const LoadParameters& init) {
    pem::IdentOptions opt;
    opt.free = c.ident.free;
    opt.burn_in = c.ident.burn_in;
    opt.restarts = c.ident.restarts;
    opt.restart_seed = c.ident.restart_seed;
    opt.max_iterations = c.ident.max_iterations;
    opt.label = cfg::method_label(m);
    const pem::ParameterBounds bounds = pem::ParameterBounds::around(init, c.ident.bounds_scale);
    if (m == cfg::Method::Tm) return pem::identify_output_error(data, init, bounds, opt);
    return pem::identify(data, init, bounds, noise_for(c, m), opt);
}

double validation_loss(const cfg::ExperimentConfig& c, cfg::Method m, const LoadParameters& p,
                       const pem::IdentData& held_out) {
    try {
        return pem::loss(pem::evaluate_predictor(p, noise_for(c, m), held_out, false).eps, c.ident.burn_in);
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

const MethodOutcome& Study::outcome(cfg::Method m) const {
    for (const auto& o : outcomes) {
        if (o.method == m) return o;
    }
    throw StateError(std::string("study has no result for ") + cfg::method_label(m));
}

Study run_study(const cfg::ExperimentConfig& c, const std::vector<cfg::Method>& methods) {
    Study s;
    s.config = c;
    s.eq = stage("simulate", [&] { return build_equilibrium(c); });
    s.raw = stage("simulate", [&] { return sim::simulate(s.eq, c.scenario); });
    s.window = stage("simulate", [&] { return analysis_window(c, s.raw); });
    s.data = pem::IdentData::from_series(s.window);
    stage("simulate", [&] {
        sim::Scenario sc = c.scenario;
        sc.internal.seed = c.ident.validation_seed;
        sc.external.seed = c.ident.validation_seed + 1000;
        sc.measurement_seed = c.ident.validation_seed + 2000;
        s.held_out = pem::IdentData::from_series(analysis_window(c, sim::simulate(s.eq, sc)));
        return 0;
    });
    s.truth = s.eq.load;
    s.init = initial_guess(c, s.truth);
    s.truth_response = pem::simulate_model(s.truth, s.data);
    for (cfg::Method m : methods) {
        MethodOutcome o;
        o.method = m;
        o.result = stage(cfg::method_label(m), [&] { return run_method(c, m, s.data, s.init); });
        o.validation_loss = validation_loss(c, m, o.result.estimate, s.held_out);
        o.simulated = pem::simulate_model(o.result.estimate, s.data);
        o.fit_truth = pem::fit_percent(s.truth_response, o.simulated, c.ident.burn_in);
        s.outcomes.push_back(std::move(o));
    }
    return s;
}

RecoveryCheck pem_a_recovery(const LoadParameters& est, const LoadParameters& truth) {
    static const std::vector<std::pair<const char*, double>> tol = {
        {"X", 0.25}, {"Xp", 0.05}, {"Tj", 0.05}, {"Td0p", 0.30}, {"s0", 0.10}, {"Exp0", 0.05}, {"Eyp0", 0.05}};
    RecoveryCheck r;
    r.pass = true;
    for (const auto& [name, t] : tol) {
        const int i = LoadParameters::index_of(name);
        const double e = rel_err(est.get(i), truth.get(i));
        const bool ok = std::abs(e) < t;
        r.pass = r.pass && ok;
        r.detail += std::string(name) + " " + fmt("%+.3f", e) + (ok ? "" : "!") + " ";
    }
    return r;
}

bool pem_b_degraded(const Study& s) {
    const auto& b = s.outcome(cfg::Method::PemB);
    const auto& a = s.outcome(cfg::Method::PemA);
    const double tj = std::abs(rel_err(b.result.estimate.Tj, s.truth.Tj));
    return tj > 0.5 || b.validation_loss > 3.0 * a.validation_loss;
}

bool tm_degraded(const Study& s) {
    const auto& t = s.outcome(cfg::Method::Tm).result.estimate;
    return std::max(std::abs(rel_err(t.X, s.truth.X)), std::abs(rel_err(t.Td0p, s.truth.Td0p))) > 1.0;
}

std::string cmd_simulate(const cfg::ExperimentConfig& c, const std::string& out_dir) {
    c.validate();
    const sim::SystemEquilibrium eq = stage("simulate", [&] { return build_equilibrium(c); });
    const sim::MeasurementSeries raw = stage("simulate", [&] { return sim::simulate(eq, c.scenario); });
    const sim::MeasurementSeries win = stage("simulate", [&] { return analysis_window(c, raw); });
    ensure_dir(out_dir);
    io::write_series(path_in(out_dir, "series.csv"), raw, provenance(c));
    auto extra = provenance(c);
    extra.emplace_back("window", io::format_number(c.analysis_start) + " <= t < " + io::format_number(c.analysis_end));
    io::write_series(path_in(out_dir, "window.csv"), win, extra);
    io::write_text(path_in(out_dir, "equilibrium.txt"), equilibrium_report(eq));
    return "simulated " + std::to_string(raw.rows()) + " samples -> " + path_in(out_dir, "series.csv");
}

std::string cmd_diagnose(const cfg::ExperimentConfig& c, const std::string& series_path, const std::string& out_dir) {
    c.validate();
    const sim::MeasurementSeries w = prepare(c, io::read_series(series_path));
    const sim::SystemEquilibrium eq = stage("diagnose", [&] { return build_equilibrium(c); });
    const DiagnosticsResult d = stage("diagnose", [&] { return run_diagnostics(c, eq, w); });
    ensure_dir(out_dir);
    write_diagnostics(d, w, out_dir);
    return d.verdict;
}

std::string cmd_identify(const cfg::ExperimentConfig& c, const std::string& series_path, cfg::Method m,
                         const std::string& out_dir) {
    c.validate();
    const sim::MeasurementSeries w = prepare(c, io::read_series(series_path));
    const sim::SystemEquilibrium eq = stage("identify", [&] { return build_equilibrium(c); });
    const pem::IdentData data = pem::IdentData::from_series(w);
    const LoadParameters truth = eq.load;
    const LoadParameters init = initial_guess(c, truth);
    ensure_dir(out_dir);
    pem::IdentResult r;
    try {
        r = run_method(c, m, data, init);
    } catch (const Error& e) {
        io::write_text(path_in(out_dir, "identify.txt"),
                       std::string("method ") + cfg::method_label(m) + "\nFAILED: " + e.what() + "\n");
        throw IdentificationError(std::string("stage identify: ") + e.what());
    }
    const std::string report = ident_report(c, m, r, truth, init);
    io::write_text(path_in(out_dir, "identify.txt"), report);
    io::write_text(path_in(out_dir, "trace.csv"), io::table_text(trace_table(r)));

    io::Table params;
    params.label_column = "parameter";
    params.columns = {"truth", "initial", "estimate", "rel_error"};
    params.values.resize(LoadParameters::kCount, 4);
    for (int i = 0; i < LoadParameters::kCount; ++i) {
        params.labels.emplace_back(LoadParameters::kNames[i]);
        params.values.row(i) << truth.get(i), init.get(i), r.estimate.get(i), rel_err(r.estimate.get(i), truth.get(i));
    }
    params.header = {{"method", cfg::method_label(m)}};
    io::write_text(path_in(out_dir, "params.csv"), io::table_text(params));

    const pem::Prediction pred = pem::evaluate_predictor(r.estimate, noise_for(c, m), data, m == cfg::Method::Tm);
    const Eigen::MatrixXd simulated = pem::simulate_model(r.estimate, data);
    io::Table fit;
    fit.header = {{"method", cfg::method_label(m)}};
    fit.columns = {"time", "dP", "dQ", "dP_pred", "dQ_pred", "dP_sim", "dQ_sim"};
    fit.values.resize(w.rows(), 7);
    fit.values << w.time, data.y, pred.yhat, simulated;
    io::write_text(path_in(out_dir, "fit.csv"), io::table_text(fit));
    return report;
}

std::string cmd_reproduce(const cfg::ExperimentConfig& c, const std::string& out_dir) {
    c.validate();
    const std::vector<cfg::Method> methods = {cfg::Method::PemA, cfg::Method::PemB, cfg::Method::Tm};
    const Study s = run_study(c, methods);
    const DiagnosticsResult d = stage("diagnose", [&] { return run_diagnostics(c, s.eq, s.window); });

    ensure_dir(out_dir);
    io::write_text(path_in(out_dir, "config.txt"), cfg::format_config(c));
    io::write_series(path_in(out_dir, "series.csv"), s.raw, provenance(c));
    io::write_series(path_in(out_dir, "window.csv"), s.window, provenance(c));
    io::write_text(path_in(out_dir, "equilibrium.txt"), equilibrium_report(s.eq));
    write_diagnostics(d, s.window, out_dir);

    io::Table params;
    params.label_column = "parameter";
    params.columns = {"truth", "initial"};
    for (const auto& o : s.outcomes) params.columns.push_back(cfg::method_label(o.method));
    for (const auto& o : s.outcomes) params.columns.push_back(std::string("rel_") + cfg::method_label(o.method));
    const int nm = static_cast<int>(s.outcomes.size());
    params.values.resize(LoadParameters::kCount, 2 + 2 * nm);
    for (int i = 0; i < LoadParameters::kCount; ++i) {
        params.labels.emplace_back(LoadParameters::kNames[i]);
        params.values(i, 0) = s.truth.get(i);
        params.values(i, 1) = s.init.get(i);
        for (int k = 0; k < nm; ++k) {
            const double e = s.outcomes[k].result.estimate.get(i);
            params.values(i, 2 + k) = e;
            params.values(i, 2 + nm + k) = rel_err(e, s.truth.get(i));
        }
    }
    io::write_text(path_in(out_dir, "params.csv"), io::table_text(params));

    io::Table fig5;
    fig5.header = {{"content", "measured dP, dQ, true-load response and each model's simulated response"}};
    fig5.columns = {"time", "dP", "dQ", "dP_true", "dQ_true"};
    for (const auto& o : s.outcomes) {
        fig5.columns.push_back(std::string("dP_") + cfg::method_label(o.method));
        fig5.columns.push_back(std::string("dQ_") + cfg::method_label(o.method));
    }
    fig5.values.resize(s.window.rows(), 5 + 2 * nm);
    fig5.values.leftCols(5) << s.window.time, s.data.y, s.truth_response;
    for (int k = 0; k < nm; ++k) fig5.values.middleCols(5 + 2 * k, 2) = s.outcomes[k].simulated;
    io::write_text(path_in(out_dir, "fig5.csv"), io::table_text(fig5));

    std::ostringstream os;
    os << "reproduction (seed " << c.scenario.internal.seed << ")\n\n";
    os << "true load parameters (load-bus frame)\n";
    for (int i = 0; i < 7; ++i) os << "  " << LoadParameters::kNames[i] << " = " << fmt("%.6f", s.truth.get(i)) << "\n";
    os << "\nestimates\n";
    char line[256];
    std::snprintf(line, sizeof(line), "  %-6s %10s", "param", "truth");
    os << line;
    for (const auto& o : s.outcomes) {
        std::snprintf(line, sizeof(line), " %12s", cfg::method_label(o.method));
        os << line;
    }
    os << "\n";
    for (int i = 0; i < 7; ++i) {
        std::snprintf(line, sizeof(line), "  %-6s %10.5f", LoadParameters::kNames[i], s.truth.get(i));
        os << line;
        for (const auto& o : s.outcomes) {
            std::snprintf(line, sizeof(line), " %12.5f", o.result.estimate.get(i));
            os << line;
        }
        os << "\n";
    }
    os << "\nper method: loss, held-out validation loss, fit to the true-load response (dP, dQ)\n";
    for (const auto& o : s.outcomes) {
        std::snprintf(line, sizeof(line), "  %-6s %.4e  %.4e  %7.2f%% %7.2f%%  %s\n", cfg::method_label(o.method),
                      o.result.loss, o.validation_loss, o.fit_truth[0], o.fit_truth[1], o.result.status.c_str());
        os << line;
    }
    const RecoveryCheck rec = pem_a_recovery(s.outcome(cfg::Method::PemA).result.estimate, s.truth);
    os << "\nPEM_A recovery envelope: " << (rec.pass ? "inside" : "OUTSIDE") << " (" << rec.detail << ")\n";
    os << "PEM_B degraded: " << (pem_b_degraded(s) ? "yes" : "no") << "\n";
    os << "TM degraded: " << (tm_degraded(s) ? "yes" : "no") << "\n";
    for (const auto& o : s.outcomes) {
        const std::string flags = flags_for(o.result, s.truth);
        if (!flags.empty()) os << "\n" << cfg::method_label(o.method) << " flags:\n" << flags;
        io::write_text(path_in(out_dir, std::string("trace_") + cfg::method_label(o.method) + ".csv"),
                       io::table_text(trace_table(o.result)));
    }
    os << "\n" << d.verdict;
    io::write_text(path_in(out_dir, "report.txt"), os.str());
    return os.str();
}

std::string cmd_reproduce_batch(const cfg::ExperimentConfig& c, std::uint64_t first, std::uint64_t last,
                                const std::string& out_dir) {
    c.validate();
    if (last < first) throw ConfigError("seed range must be ascending");
    const std::size_t n = static_cast<std::size_t>(last - first + 1);
    struct Row {
        bool ok = false;
        std::string error;
        bool recovered = false, b_degraded = false, tm_bad = false;
        std::vector<double> values;
    };
    std::vector<Row> rows(n);
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(n)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            const std::uint64_t seed = first + k;
            const cfg::ExperimentConfig cs = c.with_seed(seed);
            Row& r = rows[k];
            try {
                cmd_reproduce(cs, path_in(out_dir, "seed_" + std::to_string(seed)));
                const Study s = run_study(cs, {cfg::Method::PemA, cfg::Method::PemB, cfg::Method::Tm});
                r.recovered = pem_a_recovery(s.outcome(cfg::Method::PemA).result.estimate, s.truth).pass;
                r.b_degraded = pem_b_degraded(s);
                r.tm_bad = tm_degraded(s);
                r.values = {static_cast<double>(seed), r.recovered ? 1.0 : 0.0, r.b_degraded ? 1.0 : 0.0, r.tm_bad ? 1.0 : 0.0};
                for (const auto& o : s.outcomes) {
                    for (int i = 0; i < 7; ++i) r.values.push_back(rel_err(o.result.estimate.get(i), s.truth.get(i)));
                }
                r.ok = true;
            } catch (const Error& e) {
                r.error = e.what();
            }
        }
    };
    ensure_dir(out_dir);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    io::Table t;
    t.columns = {"seed", "pem_a_recovered", "pem_b_degraded", "tm_degraded"};
    for (const char* m : {"PEM_A", "PEM_B", "TM"}) {
        for (int i = 0; i < 7; ++i) t.columns.push_back(std::string("rel_") + m + "_" + LoadParameters::kNames[i]);
    }
    std::vector<const Row*> good;
    for (const auto& r : rows) {
        if (r.ok) good.push_back(&r);
    }
    t.values.resize(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t k = 0; k < good.size(); ++k) {
        for (std::size_t j = 0; j < good[k]->values.size(); ++j) t.values(k, j) = good[k]->values[j];
    }
    io::write_text(path_in(out_dir, "summary.csv"), io::table_text(t));

    int rec = 0, bd = 0, tb = 0;
    std::ostringstream os;
    os << "batch seeds " << first << ".." << last << "\n";
    for (std::size_t k = 0; k < n; ++k) {
        const Row& r = rows[k];
        os << "  seed " << first + k << ": ";
        if (!r.ok) {
            os << "FAILED " << r.error << "\n";
            continue;
        }
        rec += r.recovered;
        bd += r.b_degraded;
        tb += r.tm_bad;
        os << "PEM_A " << (r.recovered ? "recovered" : "outside envelope") << ", PEM_B "
           << (r.b_degraded ? "degraded" : "not degraded") << ", TM " << (r.tm_bad ? "degraded" : "not degraded") << "\n";
    }
    os << "PEM_A recovered in " << rec << "/" << n << " runs\n";
    os << "PEM_B degraded in " << bd << "/" << n << " runs\n";
    os << "TM degraded in " << tb << "/" << n << " runs\n";
    io::write_text(path_in(out_dir, "summary.txt"), os.str());
    return os.str();
}

}  // namespace loadid::app
