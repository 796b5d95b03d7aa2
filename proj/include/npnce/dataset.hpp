#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "npnce/error.hpp"

namespace npnce {

/// Observation table: n rows, p named columns, optionally one designated
/// response column.
struct DataMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
  std::optional<std::size_t> response;

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(values.cols()); }

  /// Column index by name, or nullopt.
  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return j;
    return std::nullopt;
  }

  /// Checks shape consistency, finiteness and unique names.
  void validate() const {
    if (names.size() != p())
      throw InputError("DataMatrix: " + std::to_string(names.size()) + " names for " +
                       std::to_string(p()) + " columns");
    std::set<std::string> seen;
    for (const auto& name : names)
      if (!seen.insert(name).second) throw InputError("DataMatrix: duplicate column name '" + name + "'");
    if (!values.allFinite()) throw InputError("DataMatrix: non-finite entry");
    if (response && *response >= p()) throw InputError("DataMatrix: response index out of range");
  }
};

inline std::vector<std::string> default_column_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("X" + std::to_string(j));
  return names;
}

/// Result of quantile trimming. `rows` are indices into the source matrix,
/// ascending.
struct TrimmedData {
  std::vector<std::size_t> rows;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double alpha = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim_ws(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

// Order statistic x_(k) with k = ceil(q n), 1-based, clamped to [1, n].
inline std::size_t order_statistic_rank(double q, std::size_t n) {
  const double raw = std::ceil(q * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(raw < 1.0 ? 1 : static_cast<std::size_t>(raw), 1, n);
}

}  // namespace detail

/// Parses delimited text with one header row. The designated response is
/// recorded by name; an empty `response` leaves it unset.
inline DataMatrix parse_table(std::istream& in, std::string_view response, char delim = ',') {
  std::string line;
  if (!std::getline(in, line)) throw InputError("table: empty input, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  DataMatrix data;
  for (auto field : detail::split(line, delim)) data.names.emplace_back(detail::trim_ws(field));
  const std::size_t p = data.names.size();
  {
    std::set<std::string> seen;
    for (const auto& name : data.names)
      if (!seen.insert(name).second) throw InputError("table: duplicate header '" + name + "'");
  }

  std::vector<double> cells;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim_ws(line).empty()) continue;
    const auto fields = detail::split(line, delim);
    if (fields.size() != p)
      throw InputError("table: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(p));
    for (std::size_t j = 0; j < p; ++j) {
      const auto value = detail::parse_number(fields[j]);
      if (!value)
        throw InputError("table: non-numeric cell '" + std::string(detail::trim_ws(fields[j])) + "' at row " +
                         std::to_string(row + 1) + ", column '" + data.names[j] + "'");
      cells.push_back(*value);
    }
    ++row;
  }

  data.values.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < row; ++r)
    for (std::size_t j = 0; j < p; ++j) data.values(r, j) = cells[r * p + j];

  if (!response.empty()) {
    data.response = data.index_of(response);
    if (!data.response) throw InputError("table: unknown response column '" + std::string(response) + "'");
  }
  if (data.p() < 2) throw InputError("table: need at least 2 columns");
  if (data.n() < 10) throw InputError("table: need at least 10 rows, got " + std::to_string(data.n()));
  return data;
}

inline DataMatrix load_table(const std::string& path, std::string_view response, char delim = ',') {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_table(in, response, delim);
}

/// Writes `data` as delimited text, 17 significant digits.
inline void write_table(std::ostream& out, const DataMatrix& data, char delim = ',') {
  for (std::size_t j = 0; j < data.p(); ++j) out << (j ? std::string(1, delim) : "") << data.names[j];
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < data.n(); ++r) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
      if (j) out << delim;
      out << buf;
    }
    out << '\n';
  }
}

/// Keeps the rows whose every coordinate lies in the closed box [lower, upper].
inline std::vector<std::size_t> rows_within(const DataMatrix& data, const Eigen::VectorXd& lower,
                                            const Eigen::VectorXd& upper) {
  std::vector<std::size_t> rows;
  for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
    const auto row = data.values.row(r).transpose().array();
    if ((row >= lower.array()).all() && (row <= upper.array()).all()) rows.push_back(static_cast<std::size_t>(r));
  }
  return rows;
}

/// Per-variable quantile trimming at alpha/p and 1 - alpha/p. A row is
/// dropped when any coordinate falls outside its variable's bounds.
inline TrimmedData trim(const DataMatrix& data, double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.25)) throw DomainError("trim: alpha must lie in [0, 0.25)");
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (n == 0 || p == 0) throw InputError("trim: empty data");

  const double q = alpha / static_cast<double>(p);
  const std::size_t lo_rank = detail::order_statistic_rank(q, n);
  const std::size_t hi_rank = detail::order_statistic_rank(1.0 - q, n);

  TrimmedData out;
  out.alpha = alpha;
  out.lower.resize(static_cast<Eigen::Index>(p));
  out.upper.resize(static_cast<Eigen::Index>(p));
  std::vector<double> column(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t r = 0; r < n; ++r) column[r] = data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    std::sort(column.begin(), column.end());
    out.lower[static_cast<Eigen::Index>(j)] = column[lo_rank - 1];
    out.upper[static_cast<Eigen::Index>(j)] = column[hi_rank - 1];
    if (!(column[lo_rank - 1] < column[hi_rank - 1]))
      throw InputError("trim: column '" + (j < data.names.size() ? data.names[j] : std::to_string(j)) +
                       "' has no spread inside its trimming bounds");
  }
  out.rows = rows_within(data, out.lower, out.upper);
  if (out.rows.size() < 10)
    throw InputError("trim: only " + std::to_string(out.rows.size()) + " rows survive trimming, need 10");
  return out;
}

/// The sub-matrix of retained rows, names and response carried over.
inline DataMatrix restrict_rows(const DataMatrix& data, const std::vector<std::size_t>& rows) {
  DataMatrix out;
  out.names = data.names;
  out.response = data.response;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), data.values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.values.row(static_cast<Eigen::Index>(k)) = data.values.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

inline DataMatrix restrict_rows(const DataMatrix& data, const TrimmedData& trimmed) {
  return restrict_rows(data, trimmed.rows);
}

/// Largest gap between consecutive sorted values.
inline double max_spacing_diagnostic(const std::vector<double>& sorted_values) {
  if (sorted_values.size() < 2) throw InputError("max_spacing_diagnostic: need at least 2 values");
  double gap = 0.0;
  for (std::size_t k = 1; k < sorted_values.size(); ++k) gap = std::max(gap, sorted_values[k] - sorted_values[k - 1]);
  return gap;
}

}  // namespace npnce
