#include "loadid/grid.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "loadid/error.hpp"

namespace loadid::grid {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct LineReader {
    int line_no;
    std::vector<std::string> fields;

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("line " + std::to_string(line_no) + ": " + what);
    }

    void expect_count(std::size_t lo, std::size_t hi, const char* section) const {
        if (fields.size() < lo || fields.size() > hi) {
            fail(std::string("[") + section + "] record expects " + std::to_string(lo) +
                 (lo == hi ? "" : "-" + std::to_string(hi)) + " fields, got " +
                 std::to_string(fields.size()));
        }
    }

    double num(std::size_t i, const char* name) const {
        const std::string& f = fields.at(i);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(f, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != f.size() || !std::isfinite(v)) fail(std::string("field '") + name + "' is not a number: " + f);
        return v;
    }

    int integer(std::size_t i, const char* name) const {
        const std::string& f = fields.at(i);
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(f, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != f.size()) fail(std::string("field '") + name + "' is not an integer: " + f);
        return static_cast<int>(v);
    }
};

BusType parse_bus_type(const LineReader& r, const std::string& s) {
    if (s == "slack") return BusType::Slack;
    if (s == "pv" || s == "PV") return BusType::PV;
    if (s == "pq" || s == "PQ") return BusType::PQ;
    r.fail("field 'type' must be slack|pv|pq, got " + s);
}

LoadKind parse_load_kind(const LineReader& r, const std::string& s) {
    if (s == "impedance") return LoadKind::Impedance;
    if (s == "motor") return LoadKind::Motor;
    if (s == "injection") return LoadKind::Injection;
    r.fail("field 'kind' must be impedance|motor|injection, got " + s);
}

const char* type_name(BusType t) {
    switch (t) {
        case BusType::Slack: return "slack";
        case BusType::PV: return "pv";
        case BusType::PQ: return "pq";
    }
    return "pq";
}

const char* kind_name(LoadKind k) {
    switch (k) {
        case LoadKind::Impedance: return "impedance";
        case LoadKind::Motor: return "motor";
        case LoadKind::Injection: return "injection";
    }
    return "impedance";
}

}  // namespace

int NetworkCase::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == bus_id) return static_cast<int>(i);
    }
    throw ValidationError("unknown bus " + std::to_string(bus_id));
}

bool NetworkCase::has_bus(int bus_id) const {
    for (const auto& b : buses) {
        if (b.id == bus_id) return true;
    }
    return false;
}

int NetworkCase::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == BusType::Slack) return static_cast<int>(i);
    }
    throw ValidationError("case has no slack bus");
}

Complex NetworkCase::load_at(int bus_id) const {
    Complex s{0.0, 0.0};
    for (const auto& l : loads) {
        if (l.bus == bus_id) s += Complex(l.p, l.q);
    }
    return s;
}

const Load* NetworkCase::motor_load() const {
    for (const auto& l : loads) {
        if (l.kind == LoadKind::Motor) return &l;
    }
    return nullptr;
}

void NetworkCase::validate() const {
    if (buses.empty()) throw ValidationError("case has no buses");
    if (!(frequency_hz > 0.0)) throw ValidationError("system frequency must be positive");
    std::set<int> ids;
    int slacks = 0;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second) throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.type == BusType::Slack) ++slacks;
        if (b.type != BusType::PQ && !(b.v_set > 0.0)) {
            throw ValidationError("bus " + std::to_string(b.id) + ": voltage set-point must be positive");
        }
    }
    if (slacks != 1) throw ValidationError("case needs exactly one slack bus, found " + std::to_string(slacks));
    for (const auto& br : branches) {
        if (!ids.count(br.from) || !ids.count(br.to)) {
            throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                  " references a missing bus");
        }
        if (br.from == br.to) throw ValidationError("branch endpoints coincide at bus " + std::to_string(br.from));
        if (!(std::hypot(br.r, br.x) > 0.0)) {
            throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                  " has zero impedance");
        }
    }
    std::set<int> gen_buses;
    for (const auto& g : generators) {
        if (!ids.count(g.bus)) throw ValidationError("generator references missing bus " + std::to_string(g.bus));
        if (!gen_buses.insert(g.bus).second) throw ValidationError("two generators at bus " + std::to_string(g.bus));
        if (buses[index_of(g.bus)].type == BusType::PQ) {
            throw ValidationError("generator at PQ bus " + std::to_string(g.bus));
        }
        if (!(g.xdp > 0.0)) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": x'd must be positive");
        if (!(g.tj > 0.0)) throw ValidationError("generator at bus " + std::to_string(g.bus) + ": Tj must be positive");
    }
    for (const auto& b : buses) {
        if (b.type != BusType::PQ && !gen_buses.count(b.id)) {
            throw ValidationError("bus " + std::to_string(b.id) + " is " + type_name(b.type) + " but has no generator");
        }
    }
    int motors = 0;
    for (const auto& l : loads) {
        if (!ids.count(l.bus)) throw ValidationError("load references missing bus " + std::to_string(l.bus));
        if (l.kind != LoadKind::Impedance && buses[index_of(l.bus)].type != BusType::PQ) {
            throw ValidationError(std::string(kind_name(l.kind)) + " load at bus " + std::to_string(l.bus) +
                                  " must sit on a PQ bus");
        }
        if (l.kind == LoadKind::Motor) ++motors;
    }
    if (motors > 1) throw ValidationError("at most one motor load is supported");
}

Eigen::VectorXcd PowerFlowSolution::voltage() const {
    Eigen::VectorXcd v(vm.size());
    for (Eigen::Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
    return v;
}

NetworkCase load_case(const std::string& text) {
    NetworkCase c;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "system" && section != "bus" && section != "branch" && section != "gen" &&
                section != "load") {
                throw ParseError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            }
            continue;
        }
        LineReader r{line_no, {}};
        std::istringstream ls(line);
        for (std::string f; ls >> f;) r.fields.push_back(f);
        if (section.empty()) r.fail("record outside of any section");
        if (section == "system") {
            r.expect_count(2, 2, "system");
            if (r.fields[0] != "frequency") r.fail("unknown system key " + r.fields[0]);
            c.frequency_hz = r.num(1, "frequency");
        } else if (section == "bus") {
            // id type v_set p_gen [b_shunt]
            r.expect_count(4, 5, "bus");
            Bus b;
            b.id = r.integer(0, "id");
            b.type = parse_bus_type(r, r.fields[1]);
            b.v_set = r.num(2, "v_set");
            b.p_gen = r.num(3, "p_gen");
            if (r.fields.size() == 5) b.b_shunt = r.num(4, "b_shunt");
            c.buses.push_back(b);
        } else if (section == "branch") {
            // from to r x b
            r.expect_count(5, 5, "branch");
            c.branches.push_back({r.integer(0, "from"), r.integer(1, "to"), r.num(2, "r"), r.num(3, "x"),
                                  r.num(4, "b")});
        } else if (section == "gen") {
            // bus tj xdp damping
            r.expect_count(3, 4, "gen");
            Generator g;
            g.bus = r.integer(0, "bus");
            g.tj = r.num(1, "tj");
            g.xdp = r.num(2, "xdp");
            if (r.fields.size() == 4) g.damping = r.num(3, "damping");
            c.generators.push_back(g);
        } else {
            // bus p q kind
            r.expect_count(4, 4, "load");
            c.loads.push_back({r.integer(0, "bus"), r.num(1, "p"), r.num(2, "q"), parse_load_kind(r, r.fields[3])});
        }
    }
    c.validate();
    return c;
}

NetworkCase load_case_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open case file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return load_case(ss.str());
}

std::string format_case(const NetworkCase& c) {
    std::ostringstream o;
    o << std::setprecision(17);
    o << "[system]\nfrequency " << c.frequency_hz << "\n[bus]\n";
    for (const auto& b : c.buses) {
        o << b.id << ' ' << type_name(b.type) << ' ' << b.v_set << ' ' << b.p_gen << ' ' << b.b_shunt << '\n';
    }
    o << "[branch]\n";
    for (const auto& br : c.branches) o << br.from << ' ' << br.to << ' ' << br.r << ' ' << br.x << ' ' << br.b << '\n';
    o << "[gen]\n";
    for (const auto& g : c.generators) o << g.bus << ' ' << g.tj << ' ' << g.xdp << ' ' << g.damping << '\n';
    o << "[load]\n";
    for (const auto& l : c.loads) o << l.bus << ' ' << l.p << ' ' << l.q << ' ' << kind_name(l.kind) << '\n';
    return o.str();
}

AdmittanceMatrix build_admittance(const NetworkCase& c, bool fold_constant_loads, std::optional<int> exclude_bus,
                                  const PowerFlowSolution* pf) {
    if (fold_constant_loads && pf == nullptr) {
        throw StateError("load folding requires a power-flow solution");
    }
    const int n = c.size();
    AdmittanceMatrix out;
    out.y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& b : c.buses) out.bus_ids.push_back(b.id);
    for (const auto& br : c.branches) {
        const int i = c.index_of(br.from);
        const int k = c.index_of(br.to);
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b / 2.0);
        out.y(i, i) += ys + ysh;
        out.y(k, k) += ys + ysh;
        out.y(i, k) -= ys;
        out.y(k, i) -= ys;
    }
    for (int i = 0; i < n; ++i) out.y(i, i) += Complex(0.0, c.buses[i].b_shunt);
    if (fold_constant_loads) {
        if (pf->vm.size() != n) throw StateError("power-flow solution does not match the case");
        for (const auto& l : c.loads) {
            if (l.kind == LoadKind::Motor) continue;
            if (exclude_bus && l.bus == *exclude_bus) continue;
            const int i = c.index_of(l.bus);
            const double v = pf->vm[i];
            out.y(i, i) += Complex(l.p, -l.q) / (v * v);
            if (out.folded_loads.empty() || out.folded_loads.back() != l.bus) out.folded_loads.push_back(l.bus);
        }
    }
    return out;
}

Eigen::VectorXcd power_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
    const Eigen::VectorXcd i = y * v;
    return v.cwiseProduct(i.conjugate());
}

PowerFlowSolution solve_power_flow(const NetworkCase& c, const PowerFlowOptions& opt) {
    c.validate();
    const int n = c.size();
    const Eigen::MatrixXcd y = build_admittance(c, false).y;

    Eigen::VectorXd sched_p = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sched_q = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
    std::vector<int> pvpq;
    std::vector<int> pq;
    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses[i];
        const Complex sl = c.load_at(b.id);
        sched_p[i] = (b.type == BusType::PV ? b.p_gen : 0.0) - sl.real();
        sched_q[i] = -sl.imag();
        if (b.type != BusType::PQ) vm[i] = b.v_set;
        if (b.type != BusType::Slack) pvpq.push_back(i);
        if (b.type == BusType::PQ) pq.push_back(i);
    }
    const int na = static_cast<int>(pvpq.size());
    const int nv = static_cast<int>(pq.size());

    auto voltage = [&]() {
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
        return v;
    };
    auto mismatch = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd s = power_injections(y, v);
        Eigen::VectorXd f(na + nv);
        for (int a = 0; a < na; ++a) f[a] = s[pvpq[a]].real() - sched_p[pvpq[a]];
        for (int a = 0; a < nv; ++a) f[na + a] = s[pq[a]].imag() - sched_q[pq[a]];
        return f;
    };

    PowerFlowSolution sol;
    Eigen::VectorXcd v = voltage();
    Eigen::VectorXd f = mismatch(v);
    double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    int it = 0;
    while (norm >= opt.tolerance) {
        if (it >= opt.max_iterations) {
            throw ConvergenceError("power flow did not converge in " + std::to_string(opt.max_iterations) +
                                   " iterations, final mismatch " + std::to_string(norm));
        }
        // dS/dVa and dS/dVm in complex form, then pick real/imag rows.
        const Eigen::VectorXcd ibus = y * v;
        Eigen::MatrixXcd ds_dva(n, n);
        Eigen::MatrixXcd ds_dvm(n, n);
        for (int r = 0; r < n; ++r) {
            for (int k = 0; k < n; ++k) {
                const Complex diag_i = (r == k) ? ibus[r] : Complex{};
                ds_dva(r, k) = Complex(0.0, 1.0) * v[r] * std::conj(diag_i - y(r, k) * v[k]);
                const Complex vn = v[k] / std::abs(v[k]);
                ds_dvm(r, k) = v[r] * std::conj(y(r, k) * vn) + (r == k ? std::conj(ibus[r]) * vn : Complex{});
            }
        }
        Eigen::MatrixXd j(na + nv, na + nv);
        for (int a = 0; a < na; ++a) {
            for (int b = 0; b < na; ++b) j(a, b) = ds_dva(pvpq[a], pvpq[b]).real();
            for (int b = 0; b < nv; ++b) j(a, na + b) = ds_dvm(pvpq[a], pq[b]).real();
        }
        for (int a = 0; a < nv; ++a) {
            for (int b = 0; b < na; ++b) j(na + a, b) = ds_dva(pq[a], pvpq[b]).imag();
            for (int b = 0; b < nv; ++b) j(na + a, na + b) = ds_dvm(pq[a], pq[b]).imag();
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
        if (!lu.isInvertible()) throw ConvergenceError("singular power-flow Jacobian");
        const Eigen::VectorXd dx = lu.solve(-f);
        for (int a = 0; a < na; ++a) va[pvpq[a]] += dx[a];
        for (int a = 0; a < nv; ++a) vm[pq[a]] += dx[na + a];
        ++it;
        if (!dx.allFinite() || (vm.array() <= 0.0).any()) {
            throw ConvergenceError("power flow diverged at iteration " + std::to_string(it));
        }
        v = voltage();
        f = mismatch(v);
        norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    }
    const Eigen::VectorXcd s = power_injections(y, v);
    sol.vm = vm;
    sol.va = va;
    sol.p_inj = s.real();
    sol.q_inj = s.imag();
    sol.iterations = it;
    sol.mismatch = norm;
    return sol;
}

Eigen::MatrixXd expand_real(const Eigen::MatrixXcd& y) {
    const Eigen::Index r = y.rows();
    const Eigen::Index c = y.cols();
    Eigen::MatrixXd out(2 * r, 2 * c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) {
            const double g = y(i, k).real();
            const double b = y(i, k).imag();
            out(2 * i, 2 * k) = g;
            out(2 * i, 2 * k + 1) = -b;
            out(2 * i + 1, 2 * k) = b;
            out(2 * i + 1, 2 * k + 1) = g;
        }
    }
    return out;
}

Eigen::VectorXd stack_real(const Eigen::VectorXcd& v) {
    Eigen::VectorXd out(2 * v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[2 * i] = v[i].real();
        out[2 * i + 1] = v[i].imag();
    }
    return out;
}

Eigen::VectorXcd unstack_real(const Eigen::VectorXd& v) {
    Eigen::VectorXcd out(v.size() / 2);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = Complex(v[2 * i], v[2 * i + 1]);
    return out;
}

}  // namespace loadid::grid
