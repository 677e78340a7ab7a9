#include "loadid/config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "loadid/error.hpp"
#include "loadid/series_io.hpp"

namespace loadid::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string where(const KeyValues& kv, const std::string& key) {
    const auto it = kv.lines.find(key);
    return it == kv.lines.end() ? key : "line " + std::to_string(it->second) + ": " + key;
}

double to_double(const KeyValues& kv, const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
        throw ConfigError(where(kv, key) + ": expected a number, got '" + v + "'");
    }
    return out;
}

std::int64_t to_int(const KeyValues& kv, const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
        throw ConfigError(where(kv, key) + ": expected an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t to_seed(const KeyValues& kv, const std::string& key, const std::string& v) {
    const std::int64_t s = to_int(kv, key, v);
    if (s < 0) throw ConfigError(where(kv, key) + ": seeds must be non-negative");
    return static_cast<std::uint64_t>(s);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string num(double v) { return io::format_number(v); }

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.entries.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.entries[key] = value;
        kv.lines[key] = lineno;
    }
    return kv;
}

Method parse_method(const std::string& s) {
    if (s == "pem-a") return Method::PemA;
    if (s == "pem-b") return Method::PemB;
    if (s == "tm") return Method::Tm;
    throw ConfigError("unknown method '" + s + "' (expected pem-a, pem-b or tm)");
}

const char* method_name(Method m) {
    switch (m) {
        case Method::PemA: return "pem-a";
        case Method::PemB: return "pem-b";
        case Method::Tm: return "tm";
    }
    return "?";
}

const char* method_label(Method m) {
    switch (m) {
        case Method::PemA: return "PEM_A";
        case Method::PemB: return "PEM_B";
        case Method::Tm: return "TM";
    }
    return "?";
}

ExperimentConfig::ExperimentConfig() {
    scenario.internal = {0.002, 1.5, 5.0, 1};
    scenario.external = {0.0, 1.5, 5.0, 1001};
    scenario.measurement_seed = 2001;
}

ExperimentConfig ExperimentConfig::with_seed(std::uint64_t seed) const {
    ExperimentConfig c = *this;
    c.scenario.internal.seed = seed;
    c.scenario.external.seed = seed + 1000;
    c.scenario.measurement_seed = seed + 2000;
    c.ident.init_seed = seed;
    c.ident.restart_seed = seed;
    c.ident.validation_seed = seed + 5000;
    return c;
}

std::string ExperimentConfig::resolved_case_path() const {
    if (case_file.empty()) return {};
    const std::filesystem::path p(case_file);
    return p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

void ExperimentConfig::validate() const {
    const std::string path = resolved_case_path();
    if (!path.empty() && !std::filesystem::exists(path)) throw ConfigError("case file '" + path + "' does not exist");
    try {
        scenario.validate();
        motor.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (scenario.measurement_variance < 0.0) throw ConfigError("measurement variance must be >= 0");
    if (!(analysis_end > analysis_start) || analysis_start < 0.0 || analysis_end > scenario.duration + 1e-9) {
        throw ConfigError("analysis window must satisfy 0 <= start < end <= duration");
    }
    const double nyquist = 0.5 / scenario.ts;
    if (diagnostics.band_low_hz < 0.0 || !(diagnostics.band_high_hz > diagnostics.band_low_hz) ||
        diagnostics.band_high_hz > nyquist + 1e-9) {
        throw ConfigError("diagnostic band must satisfy 0 <= low < high <= Nyquist (" + num(nyquist) + " Hz)");
    }
    if (diagnostics.segment < 8) throw ConfigError("diagnostics.segment must be >= 8");
    if (diagnostics.overlap < 0 || diagnostics.overlap >= diagnostics.segment) {
        throw ConfigError("diagnostics.overlap must be in [0, segment)");
    }
    if (diagnostics.pe_max_order < 1) throw ConfigError("diagnostics.pe.max_order must be >= 1");
    if (!(diagnostics.pe_threshold > 0.0) || !(diagnostics.eig_floor >= 0.0)) {
        throw ConfigError("diagnostic thresholds must be positive");
    }
    if (ident.q < 0.0 || ident.r < 0.0) throw ConfigError("noise variances must be >= 0");
    if (!(ident.perturbation >= 0.0) || ident.perturbation >= 1.0) {
        throw ConfigError("ident.init.perturbation must be in [0, 1)");
    }
    if (!(ident.bounds_scale > 1.0)) throw ConfigError("ident.bounds.scale must exceed 1");
    if (ident.restarts < 0 || ident.burn_in < 0 || ident.max_iterations < 1) {
        throw ConfigError("ident restarts/burn_in must be >= 0 and max_iterations >= 1");
    }
    if (ident.free.empty()) throw ConfigError("ident.free lists no parameters");
    for (const auto& name : ident.free) {
        try {
            LoadParameters::index_of(name);
        } catch (const Error&) {
            throw ConfigError("ident.free: unknown parameter '" + name + "'");
        }
    }
    for (const auto& [name, v] : ident.explicit_init) {
        (void)v;
        try {
            LoadParameters::index_of(name);
        } catch (const Error&) {
            throw ConfigError("ident.init: unknown parameter '" + name + "'");
        }
    }
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    const KeyValues kv = KeyValues::parse(text);
    ExperimentConfig c;
    c.base_dir = base_dir;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto d = [&](double& ref) -> Setter { return [&](const std::string& k, const std::string& v) { ref = to_double(kv, k, v); }; };
    auto i = [&](int& ref) -> Setter {
        return [&](const std::string& k, const std::string& v) { ref = static_cast<int>(to_int(kv, k, v)); };
    };
    auto u = [&](std::uint64_t& ref) -> Setter { return [&](const std::string& k, const std::string& v) { ref = to_seed(kv, k, v); }; };
    std::map<std::string, Setter> setters = {
        {"case", [&](const std::string&, const std::string& v) { c.case_file = v == "bundled" ? "" : v; }},
        {"out", [&](const std::string&, const std::string& v) { c.out_dir = v; }},
        {"scenario.duration", d(c.scenario.duration)},
        {"scenario.dt", d(c.scenario.dt)},
        {"scenario.ts", d(c.scenario.ts)},
        {"scenario.internal.variance", d(c.scenario.internal.variance)},
        {"scenario.internal.start", d(c.scenario.internal.start)},
        {"scenario.internal.end", d(c.scenario.internal.end)},
        {"scenario.internal.seed", u(c.scenario.internal.seed)},
        {"scenario.external.bus",
         [&](const std::string& k, const std::string& v) {
             if (v == "none" || v.empty()) {
                 c.scenario.external_bus.reset();
             } else {
                 c.scenario.external_bus = static_cast<int>(to_int(kv, k, v));
             }
         }},
        {"scenario.external.variance", d(c.scenario.external.variance)},
        {"scenario.external.start", d(c.scenario.external.start)},
        {"scenario.external.end", d(c.scenario.external.end)},
        {"scenario.external.seed", u(c.scenario.external.seed)},
        {"scenario.measurement.variance", d(c.scenario.measurement_variance)},
        {"scenario.measurement.seed", u(c.scenario.measurement_seed)},
        {"analysis.start", d(c.analysis_start)},
        {"analysis.end", d(c.analysis_end)},
        {"motor.X", d(c.motor.X)},
        {"motor.Xp", d(c.motor.Xp)},
        {"motor.Td0p", d(c.motor.Td0p)},
        {"motor.Tj", d(c.motor.Tj)},
        {"diagnostics.band.low", d(c.diagnostics.band_low_hz)},
        {"diagnostics.band.high", d(c.diagnostics.band_high_hz)},
        {"diagnostics.segment", i(c.diagnostics.segment)},
        {"diagnostics.overlap", i(c.diagnostics.overlap)},
        {"diagnostics.pe.max_order", i(c.diagnostics.pe_max_order)},
        {"diagnostics.pe.threshold", d(c.diagnostics.pe_threshold)},
        {"diagnostics.eig_floor", d(c.diagnostics.eig_floor)},
        {"diagnostics.pitfall.threshold", d(c.diagnostics.pitfall_threshold)},
        {"diagnostics.coherence", d(c.diagnostics.coherence)},
        {"ident.method", [&](const std::string&, const std::string& v) { c.ident.method = parse_method(v); }},
        {"ident.q", d(c.ident.q)},
        {"ident.r", d(c.ident.r)},
        {"ident.init.mode",
         [&](const std::string& k, const std::string& v) {
             if (v == "truth") {
                 c.ident.init_mode = InitMode::Truth;
             } else if (v == "perturbed") {
                 c.ident.init_mode = InitMode::Perturbed;
             } else if (v == "explicit") {
                 c.ident.init_mode = InitMode::Explicit;
             } else {
                 throw ConfigError(where(kv, k) + ": expected truth, perturbed or explicit");
             }
         }},
        {"ident.init.perturbation", d(c.ident.perturbation)},
        {"ident.init.seed", u(c.ident.init_seed)},
        {"ident.bounds.scale", d(c.ident.bounds_scale)},
        {"ident.restarts", i(c.ident.restarts)},
        {"ident.restart_seed", u(c.ident.restart_seed)},
        {"ident.free", [&](const std::string&, const std::string& v) { c.ident.free = split_list(v); }},
        {"ident.burn_in", i(c.ident.burn_in)},
        {"ident.max_iterations", i(c.ident.max_iterations)},
        {"ident.validation_seed", u(c.ident.validation_seed)},
    };
    for (const auto& [key, value] : kv.entries) {
        if (key.rfind("ident.init.value.", 0) == 0) {
            c.ident.explicit_init[key.substr(17)] = to_double(kv, key, value);
            continue;
        }
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(where(kv, key) + ": unknown key");
        it->second(key, value);
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error&) {
        throw ConfigError("cannot read config '" + path + "'");
    }
    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    try {
        return parse_config(text, dir.empty() ? "." : dir.string());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream os;
    const auto& s = c.scenario;
    os << "case = " << (c.case_file.empty() ? "bundled" : c.case_file) << '\n'
       << "out = " << c.out_dir << '\n'
       << "scenario.duration = " << num(s.duration) << '\n'
       << "scenario.dt = " << num(s.dt) << '\n'
       << "scenario.ts = " << num(s.ts) << '\n'
       << "scenario.internal.variance = " << num(s.internal.variance) << '\n'
       << "scenario.internal.start = " << num(s.internal.start) << '\n'
       << "scenario.internal.end = " << num(s.internal.end) << '\n'
       << "scenario.internal.seed = " << s.internal.seed << '\n'
       << "scenario.external.bus = " << (s.external_bus ? std::to_string(*s.external_bus) : "none") << '\n'
       << "scenario.external.variance = " << num(s.external.variance) << '\n'
       << "scenario.external.start = " << num(s.external.start) << '\n'
       << "scenario.external.end = " << num(s.external.end) << '\n'
       << "scenario.external.seed = " << s.external.seed << '\n'
       << "scenario.measurement.variance = " << num(s.measurement_variance) << '\n'
       << "scenario.measurement.seed = " << s.measurement_seed << '\n'
       << "analysis.start = " << num(c.analysis_start) << '\n'
       << "analysis.end = " << num(c.analysis_end) << '\n'
       << "motor.X = " << num(c.motor.X) << '\n'
       << "motor.Xp = " << num(c.motor.Xp) << '\n'
       << "motor.Td0p = " << num(c.motor.Td0p) << '\n'
       << "motor.Tj = " << num(c.motor.Tj) << '\n';
    const auto& g = c.diagnostics;
    os << "diagnostics.band.low = " << num(g.band_low_hz) << '\n'
       << "diagnostics.band.high = " << num(g.band_high_hz) << '\n'
       << "diagnostics.segment = " << g.segment << '\n'
       << "diagnostics.overlap = " << g.overlap << '\n'
       << "diagnostics.pe.max_order = " << g.pe_max_order << '\n'
       << "diagnostics.pe.threshold = " << num(g.pe_threshold) << '\n'
       << "diagnostics.eig_floor = " << num(g.eig_floor) << '\n'
       << "diagnostics.pitfall.threshold = " << num(g.pitfall_threshold) << '\n'
       << "diagnostics.coherence = " << num(g.coherence) << '\n';
    const auto& id = c.ident;
    const char* mode = id.init_mode == InitMode::Truth ? "truth" : id.init_mode == InitMode::Perturbed ? "perturbed" : "explicit";
    std::string free;
    for (const auto& f : id.free) free += (free.empty() ? "" : ",") + f;
    os << "ident.method = " << method_name(id.method) << '\n'
       << "ident.q = " << num(id.q) << '\n'
       << "ident.r = " << num(id.r) << '\n'
       << "ident.init.mode = " << mode << '\n'
       << "ident.init.perturbation = " << num(id.perturbation) << '\n'
       << "ident.init.seed = " << id.init_seed << '\n';
    for (const auto& [k, v] : id.explicit_init) os << "ident.init.value." << k << " = " << num(v) << '\n';
    os << "ident.bounds.scale = " << num(id.bounds_scale) << '\n'
       << "ident.restarts = " << id.restarts << '\n'
       << "ident.restart_seed = " << id.restart_seed << '\n'
       << "ident.free = " << free << '\n'
       << "ident.burn_in = " << id.burn_in << '\n'
       << "ident.max_iterations = " << id.max_iterations << '\n'
       << "ident.validation_seed = " << id.validation_seed << '\n';
    return os.str();
}

}  // namespace loadid::cfg
