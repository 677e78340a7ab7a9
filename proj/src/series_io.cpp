#include "loadid/series_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "loadid/error.hpp"

namespace loadid::io {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& s, int line) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (!s.empty() && *b == '+') ++b;
    const auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || s.empty()) {
        throw ParseError("line " + std::to_string(line) + ": invalid number '" + s + "'");
    }
    return v;
}

}  // namespace

std::string Table::meta(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : header) {
        if (k == key) return v;
    }
    return fallback;
}

int Table::column_index(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return static_cast<int>(k);
    }
    throw ParseError("missing column '" + name + "'");
}

std::string format_number(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ValidationError("number formatting failed");
    return std::string(buf, p);
}

void write_table(std::ostream& os, const Table& t) {
    if (t.values.cols() != static_cast<Eigen::Index>(t.columns.size())) {
        throw ValidationError("table has " + std::to_string(t.columns.size()) + " column names for " +
                              std::to_string(t.values.cols()) + " columns");
    }
    const bool labelled = !t.label_column.empty();
    if (labelled && static_cast<Eigen::Index>(t.labels.size()) != t.values.rows()) {
        throw ValidationError("table needs one label per row");
    }
    for (const auto& [k, v] : t.header) os << "# " << k << ": " << v << '\n';
    if (labelled) os << "# labels: " << t.label_column << '\n';
    if (labelled) os << t.label_column << (t.columns.empty() ? "" : ",");
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << '\n';
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
        if (labelled) os << t.labels[r] << (t.values.cols() ? "," : "");
        for (Eigen::Index c = 0; c < t.values.cols(); ++c) os << (c ? "," : "") << format_number(t.values(r, c));
        os << '\n';
    }
}

std::string table_text(const Table& t) {
    std::ostringstream os;
    write_table(os, t);
    return os.str();
}

Table read_table(std::istream& is) {
    Table t;
    std::string line;
    int lineno = 0;
    std::vector<std::vector<double>> rows;
    bool have_columns = false;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty()) continue;
        if (s[0] == '#') {
            const std::string body = trim(s.substr(1));
            const auto colon = body.find(':');
            if (colon == std::string::npos) {
                t.header.emplace_back(body, "");
            } else if (trim(body.substr(0, colon)) == "labels") {
                t.label_column = trim(body.substr(colon + 1));
            } else {
                t.header.emplace_back(trim(body.substr(0, colon)), trim(body.substr(colon + 1)));
            }
            continue;
        }
        if (!have_columns) {
            t.columns = split(s, ',');
            if (!t.label_column.empty()) {
                if (t.columns.empty() || t.columns.front() != t.label_column) {
                    throw ParseError("line " + std::to_string(lineno) + ": first column must be '" + t.label_column + "'");
                }
                t.columns.erase(t.columns.begin());
            }
            for (const auto& c : t.columns) {
                if (c.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty column name");
            }
            have_columns = true;
            continue;
        }
        std::vector<std::string> cells = split(s, ',');
        const std::size_t expected = t.columns.size() + (t.label_column.empty() ? 0 : 1);
        if (cells.size() != expected) {
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                             " fields, found " + std::to_string(cells.size()));
        }
        if (!t.label_column.empty()) {
            t.labels.push_back(cells.front());
            cells.erase(cells.begin());
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_number(c, lineno));
        rows.push_back(std::move(row));
    }
    if (!have_columns) throw ParseError("line " + std::to_string(lineno) + ": no column header found");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(r, c) = rows[r][c];
    }
    return t;
}

Table parse_table(const std::string& text) {
    std::istringstream is(text);
    return read_table(is);
}

Table series_table(const sim::MeasurementSeries& s, const std::vector<std::pair<std::string, std::string>>& extra) {
    using Col = sim::MeasurementSeries;
    Table t;
    t.header.emplace_back("schema", kSeriesSchema);
    t.header.emplace_back("ts", format_number(s.ts));
    t.header.emplace_back("units", "time s; V, P, Q, Vx, Vy, Ix, Iy p.u.; theta rad");
    t.header.emplace_back("rows", std::to_string(s.rows()) + " (both endpoints included)");
    t.header.emplace_back("detrended", s.detrended ? "1" : "0");
    if (s.detrended) {
        for (int c = 0; c < Col::kColumns; ++c) {
            t.header.emplace_back(std::string("mean.") + Col::kNames[c], format_number(s.means[c]));
        }
    }
    for (const auto& kv : extra) t.header.push_back(kv);
    t.columns.emplace_back("time");
    for (const char* n : Col::kNames) t.columns.emplace_back(n);
    t.values.resize(s.rows(), Col::kColumns + 1);
    t.values.col(0) = s.time;
    t.values.rightCols(Col::kColumns) = s.values;
    return t;
}

sim::MeasurementSeries series_from_table(const Table& t) {
    using Col = sim::MeasurementSeries;
    const std::string schema = t.meta("schema");
    if (!schema.empty() && schema != kSeriesSchema) throw ParseError("unsupported series schema '" + schema + "'");
    sim::MeasurementSeries s;
    s.time = t.values.col(t.column_index("time"));
    s.values.resize(t.values.rows(), Col::kColumns);
    for (int c = 0; c < Col::kColumns; ++c) s.values.col(c) = t.values.col(t.column_index(Col::kNames[c]));
    const std::string ts = t.meta("ts");
    if (!ts.empty()) {
        s.ts = parse_number(ts, 0);
    } else if (s.rows() >= 2) {
        s.ts = s.time[1] - s.time[0];
    } else {
        throw ParseError("series has no ts header and fewer than two rows");
    }
    s.detrended = t.meta("detrended", "0") == "1";
    if (s.detrended) {
        for (int c = 0; c < Col::kColumns; ++c) {
            const std::string m = t.meta(std::string("mean.") + Col::kNames[c]);
            if (m.empty()) throw ParseError(std::string("detrended series lacks mean.") + Col::kNames[c]);
            s.means[c] = parse_number(m, 0);
        }
    }
    s.validate();
    return s;
}

void write_series(const std::string& path, const sim::MeasurementSeries& s,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
    write_text(path, table_text(series_table(s, extra)));
}

sim::MeasurementSeries read_series(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open series file '" + path + "'");
    try {
        return series_from_table(read_table(f));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

Table frf_table(const FrequencyResponse& f) {
    f.validate();
    Table t;
    t.header.emplace_back("schema", kFrfSchema);
    t.header.emplace_back("units", "omega rad/s");
    const Eigen::Index rows = f.values.empty() ? 0 : f.values.front().rows();
    const Eigen::Index cols = f.values.empty() ? 0 : f.values.front().cols();
    t.header.emplace_back("shape", std::to_string(rows) + "x" + std::to_string(cols));
    t.columns.emplace_back("omega_rad_s");
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const std::string out = r < static_cast<Eigen::Index>(f.outputs.size()) ? f.outputs[r] : "y" + std::to_string(r);
            const std::string in = c < static_cast<Eigen::Index>(f.inputs.size()) ? f.inputs[c] : "u" + std::to_string(c);
            t.columns.push_back("re_" + out + "/" + in);
            t.columns.push_back("im_" + out + "/" + in);
        }
    }
    t.values.resize(f.size(), 1 + 2 * rows * cols);
    for (int k = 0; k < f.size(); ++k) {
        t.values(k, 0) = f.omega[k];
        Eigen::Index j = 1;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                t.values(k, j++) = f.values[k](r, c).real();
                t.values(k, j++) = f.values[k](r, c).imag();
            }
        }
    }
    return t;
}

FrequencyResponse frf_from_table(const Table& t) {
    const std::string shape = t.meta("shape");
    const auto x = shape.find('x');
    if (x == std::string::npos) throw ParseError("FRF table lacks a shape header");
    const int rows = static_cast<int>(parse_number(shape.substr(0, x), 0));
    const int cols = static_cast<int>(parse_number(shape.substr(x + 1), 0));
    if (t.values.cols() != 1 + 2 * rows * cols) throw ParseError("FRF column count does not match its shape");
    FrequencyResponse f;
    f.omega = t.values.col(0);
    for (int r = 0; r < rows; ++r) {
        const std::string& name = t.columns[1 + 2 * r * cols];
        const auto a = name.find('_');
        const auto b = name.find('/');
        if (a == std::string::npos || b == std::string::npos || b < a) throw ParseError("bad FRF column '" + name + "'");
        f.outputs.push_back(name.substr(a + 1, b - a - 1));
    }
    for (int c = 0; c < cols; ++c) {
        const std::string& name = t.columns[1 + 2 * c];
        const auto b = name.find('/');
        if (b == std::string::npos) throw ParseError("bad FRF column '" + name + "'");
        f.inputs.push_back(name.substr(b + 1));
    }
    for (Eigen::Index k = 0; k < t.values.rows(); ++k) {
        Eigen::MatrixXcd m(rows, cols);
        Eigen::Index j = 1;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                m(r, c) = Complex(t.values(k, j), t.values(k, j + 1));
                j += 2;
            }
        }
        f.values.push_back(m);
    }
    f.validate();
    return f;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
    if (!f) throw ConfigError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace loadid::io
