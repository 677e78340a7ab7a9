#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadid/frequency.hpp"
#include "loadid/smallsig.hpp"

namespace loadid::io {

// Comma-separated table with '#'-prefixed "key: value" header comments and
// one row of column names.
struct Table {
    std::vector<std::pair<std::string, std::string>> header;
    std::string label_column;         // optional leading text column
    std::vector<std::string> labels;  // one per row when label_column is set
    std::vector<std::string> columns;
    Eigen::MatrixXd values;

    std::string meta(const std::string& key, const std::string& fallback = "") const;
    int column_index(const std::string& name) const;  // throws ParseError when absent
};

// Shortest representation that parses back to the same double.
std::string format_number(double v);

void write_table(std::ostream& os, const Table& t);
std::string table_text(const Table& t);
// Errors carry the 1-based line number.
Table read_table(std::istream& is);
Table parse_table(const std::string& text);

inline constexpr const char* kSeriesSchema = "loadid-series/1";
inline constexpr const char* kFrfSchema = "loadid-frf/1";

// Measurement series with provenance; `extra` is appended to the header.
Table series_table(const sim::MeasurementSeries& s,
                   const std::vector<std::pair<std::string, std::string>>& extra = {});
sim::MeasurementSeries series_from_table(const Table& t);

void write_series(const std::string& path, const sim::MeasurementSeries& s,
                  const std::vector<std::pair<std::string, std::string>>& extra = {});
sim::MeasurementSeries read_series(const std::string& path);

// Columns omega_rad_s, then re/im of each entry in row-major order.
Table frf_table(const FrequencyResponse& f);
FrequencyResponse frf_from_table(const Table& t);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace loadid::io
