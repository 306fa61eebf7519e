#include "core/panel.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace structfact {

void TimePanel::validate() const {
  const int p = num_series();
  const int t = num_times();
  if (p < 1) raise(ErrorCode::InvalidArgument, "TimePanel: need at least one series");
  if (t < 2) raise(ErrorCode::InvalidArgument, "TimePanel: need at least two time points");
  if (!values.allFinite()) {
    raise(ErrorCode::NonFiniteInput, "TimePanel: values contain NaN or infinity");
  }
  if (periodicity_s < 2) {
    raise(ErrorCode::InvalidArgument, "TimePanel: periodicity must be >= 2");
  }
  if (static_cast<int>(series_names.size()) != p) {
    raise(ErrorCode::InvalidArgument, "TimePanel: series name count != p");
  }
  if (static_cast<int>(time_labels.size()) != t) {
    raise(ErrorCode::InvalidArgument, "TimePanel: time label count != T");
  }
}

TimePanel make_panel(const Matrix& values, int periodicity_s) {
  TimePanel panel;
  panel.values = values;
  panel.periodicity_s = periodicity_s;
  panel.series_names.reserve(values.rows());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    panel.series_names.push_back("s" + std::to_string(i + 1));
  }
  panel.time_labels.reserve(values.cols());
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    panel.time_labels.push_back(std::to_string(t + 1));
  }
  panel.validate();
  return panel;
}

std::string format_number(double x) {
  if (!std::isfinite(x)) {
    raise(ErrorCode::NonFiniteInput, "format_number: value is not finite");
  }
  if (x == 0.0) return "0";
  int exponent = static_cast<int>(std::floor(std::log10(std::abs(x))));
  int decimals = 11 - exponent;  // 12 significant digits in total
  if (decimals < 0) decimals = 0;
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int row, int col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  // Trailing whitespace (e.g. CR from CRLF files) is tolerated; anything
  // else is a parse failure at the reported 1-based row/column.
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0') || !std::isfinite(value)) {
    raise(ErrorCode::ParseFailure,
          "CSV cell at row " + std::to_string(row) + ", column " + std::to_string(col) +
              " is not a finite number: '" + cell + "'",
          row, col);
  }
  return value;
}

}  // namespace

TimePanel read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::MissingFile, "cannot open file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorCode::ParseFailure, "empty CSV file: " + path, 1, 1);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  if (header.size() < 2) {
    raise(ErrorCode::ParseFailure, "CSV header needs a time column plus at least one series", 1, 1);
  }

  TimePanel panel;
  panel.time_column = header[0];
  panel.series_names.assign(header.begin() + 1, header.end());
  const size_t p = panel.series_names.size();

  std::vector<std::vector<double>> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != p + 1) {
      raise(ErrorCode::RaggedRows,
            "CSV row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                " cells, expected " + std::to_string(p + 1),
            row_number);
    }
    panel.time_labels.push_back(cells[0]);
    std::vector<double> row(p);
    for (size_t j = 0; j < p; ++j) {
      row[j] = parse_cell(cells[j + 1], row_number, static_cast<int>(j + 2));
    }
    rows.push_back(std::move(row));
  }

  const size_t t_count = rows.size();
  if (t_count < 2) {
    raise(ErrorCode::ParseFailure, "CSV needs at least two data rows", row_number, 1);
  }
  panel.values.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t_count));
  for (size_t t = 0; t < t_count; ++t) {
    for (size_t i = 0; i < p; ++i) {
      panel.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[t][i];
    }
  }
  return panel;
}

void write_csv(const TimePanel& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(ErrorCode::IoFailure, "cannot open file for writing: " + path);
  }
  out << panel.time_column;
  for (const auto& name : panel.series_names) out << ',' << name;
  out << '\n';
  const int p = panel.num_series();
  const int t_count = panel.num_times();
  for (int t = 0; t < t_count; ++t) {
    out << panel.time_labels[static_cast<size_t>(t)];
    for (int i = 0; i < p; ++i) {
      out << ',' << format_number(panel.values(i, t));
    }
    out << '\n';
  }
  if (!out) {
    raise(ErrorCode::IoFailure, "write failed: " + path);
  }
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(ErrorCode::IoFailure, "cannot open file for writing: " + path);
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
  if (!out) {
    raise(ErrorCode::IoFailure, "write failed: " + path);
  }
}

}  // namespace structfact
