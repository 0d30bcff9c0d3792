#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rsm/error.hpp"
#include "rsm/kernels.hpp"

namespace rsm {

// Per-column location/scale used for z-scoring. `constant` columns are only
// centered; their scale is reported as 0 and never divided by.
struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool constant = false;

  double scale() const { return constant ? 1.0 : stddev; }
  double forward(double value) const { return (value - mean) / scale(); }
  double inverse(double value) const { return value * scale() + mean; }

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

struct Normalization {
  std::vector<ColumnStats> predictors;
  ColumnStats response;
};

struct Dataset {
  Matrix x;  // n x p
  Vector y;  // n
  std::vector<std::string> labels;
  std::string response_label = "y";
  bool normalized = false;
  Normalization stats;  // meaningful when normalized
  std::vector<std::string> warnings;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }

  void validate() const {
    require(x.rows() >= 1, "dataset: need at least one row");
    require(x.cols() >= 1, "dataset: need at least one predictor");
    require(y.size() == x.rows(), "dataset: response length differs from row count");
    require(static_cast<Eigen::Index>(labels.size()) == x.cols(),
            "dataset: label count differs from predictor count");
    require(std::set<std::string>(labels.begin(), labels.end()).size() == labels.size(),
            "dataset: labels must be distinct");
    require_finite(x, "dataset: predictors");
    require_finite(y, "dataset: response");
  }

  // Rows selected by index, keeping labels and normalization metadata.
  Dataset subset(const std::vector<Eigen::Index>& rows_to_keep) const {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(rows_to_keep.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows_to_keep.size()));
    for (std::size_t r = 0; r < rows_to_keep.size(); ++r) {
      out.x.row(static_cast<Eigen::Index>(r)) = x.row(rows_to_keep[r]);
      out.y(static_cast<Eigen::Index>(r)) = y(rows_to_keep[r]);
    }
    out.labels = labels;
    out.response_label = response_label;
    out.normalized = normalized;
    out.stats = stats;
    return out;
  }
};

inline std::vector<std::string> default_labels(Eigen::Index p) {
  std::vector<std::string> labels;
  for (Eigen::Index j = 0; j < p; ++j) labels.push_back("x" + std::to_string(j + 1));
  return labels;
}

// Sample (n-1) statistics. A column counts as constant when its spread is
// below 1e-12 relative to its magnitude.
inline ColumnStats column_stats(const Eigen::Ref<const Vector>& column) {
  ColumnStats stats;
  const auto n = column.size();
  stats.mean = column.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ss += (column(i) - stats.mean) * (column(i) - stats.mean);
  stats.stddev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  const double magnitude = std::max(1.0, std::abs(stats.mean));
  if (stats.stddev <= 1e-12 * magnitude) {
    stats.constant = true;
    stats.stddev = 0.0;
  }
  return stats;
}

inline Matrix apply_normalization(const Normalization& norm, const Matrix& x) {
  require(static_cast<Eigen::Index>(norm.predictors.size()) == x.cols(),
          "normalization: column count mismatch");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto& s = norm.predictors[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = s.forward(x(i, j));
  }
  return out;
}

// z-scores every predictor column and the response with their own sample
// statistics. Constant columns are centered only and a warning is recorded.
inline Dataset normalize(const Dataset& data) {
  data.validate();
  if (data.normalized) throw InputError("normalize: dataset is already normalized");
  Dataset out = data;
  out.stats.predictors.clear();
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const ColumnStats s = column_stats(data.x.col(j));
    if (s.constant)
      out.warnings.push_back("predictor '" + data.labels[static_cast<std::size_t>(j)] +
                             "' is constant; centered without scaling");
    out.stats.predictors.push_back(s);
  }
  out.stats.response = column_stats(data.y);
  if (out.stats.response.constant)
    out.warnings.push_back("response is constant; centered without scaling");
  out.x = apply_normalization(out.stats, data.x);
  for (Eigen::Index i = 0; i < data.rows(); ++i) out.y(i) = out.stats.response.forward(data.y(i));
  out.normalized = true;
  return out;
}

inline Vector denormalize_response(const Normalization& norm, const Vector& y) {
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = norm.response.inverse(y(i));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
    if (c.size() >= 2 && c.front() == '"' && c.back() == '"') c = c.substr(1, c.size() - 2);
  }
  return cells;
}

// Reads a comma-delimited numeric table. Lines starting with '#' and blank
// lines are skipped. Zero data rows is allowed here.
inline CsvTable read_csv_table(std::istream& in, bool has_header, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '#') continue;
    auto cells = split_csv_line(line);
    if (header_pending) {
      table.header = cells;
      table.columns = cells.size();
      header_pending = false;
      continue;
    }
    if (table.columns == 0) table.columns = cells.size();
    if (cells.size() != table.columns)
      throw InputError(source + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns) + " cells, found " +
                       std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_double(cells[c]);
      if (!value || !std::isfinite(*value))
        throw InputError(source + ": line " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + ": not a finite number: '" + cells[c] + "'");
      row.push_back(*value);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CsvTable read_csv_table(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv_table(in, has_header, path);
}

// Response column given by header name or zero-based index; negative
// indices count from the end (-1 is the last column).
using ColumnRef = std::variant<std::string, long>;

inline std::size_t resolve_column(const CsvTable& table, const ColumnRef& ref,
                                  const std::string& source) {
  if (const auto* name = std::get_if<std::string>(&ref)) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (table.header[c] == *name) return c;
    throw InputError(source + ": response column '" + *name + "' not found");
  }
  const long index = std::get<long>(ref);
  const long cols = static_cast<long>(table.columns);
  const long resolved = index < 0 ? cols + index : index;
  if (resolved < 0 || resolved >= cols)
    throw InputError(source + ": response column index " + std::to_string(index) +
                     " out of range for " + std::to_string(cols) + " columns");
  return static_cast<std::size_t>(resolved);
}

inline Dataset dataset_from_table(const CsvTable& table, const ColumnRef& response,
                                  const std::string& source) {
  if (table.rows.empty()) throw InputError(source + ": no data rows");
  if (table.columns < 2) throw InputError(source + ": need a response and at least one predictor");
  const std::size_t target = resolve_column(table, response, source);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(table.columns - 1);
  Dataset data;
  data.x.resize(n, p);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    Eigen::Index out_col = 0;
    for (std::size_t c = 0; c < table.columns; ++c) {
      if (c == target) data.y(i) = row[c];
      else data.x(i, out_col++) = row[c];
    }
  }
  if (table.header.empty()) {
    data.labels = default_labels(p);
  } else {
    for (std::size_t c = 0; c < table.columns; ++c)
      if (c != target) data.labels.push_back(table.header[c]);
    data.response_label = table.header[target];
  }
  data.validate();
  return data;
}

inline Dataset load_csv(const std::string& path, bool has_header, const ColumnRef& response) {
  return dataset_from_table(read_csv_table(path, has_header), response, path);
}

// Writes predictors followed by the response as the last column.
inline void write_csv(std::ostream& out, const Dataset& data, const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& label : data.labels) out << label << ',';
  out << data.response_label << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << format_double(data.x(i, j)) << ',';
    out << format_double(data.y(i)) << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& data, const std::string& comment = {}) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_csv(out, data, comment);
}

}  // namespace rsm
