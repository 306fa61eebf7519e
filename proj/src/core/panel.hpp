#pragma once

#include <string>
#include <vector>

#include "core/numerics.hpp"

namespace structfact {

// Multivariate time panel: p series observed at T time points. Immutable by
// convention after construction; safe to share across concurrent readers.
struct TimePanel {
  Matrix values;  // p x T
  std::vector<std::string> series_names;
  std::vector<std::string> time_labels;  // opaque strings (dates, indices, ...)
  int periodicity_s = 2;                 // known period s; >= 2
  std::string time_column = "time";      // header token of the label column

  int num_series() const { return static_cast<int>(values.rows()); }
  int num_times() const { return static_cast<int>(values.cols()); }

  // Enforces p >= 1, T >= 2, finite entries, s >= 2 and name/label counts.
  void validate() const;
};

// Builds a panel with generated names (series s1..sp, labels 1..T).
TimePanel make_panel(const Matrix& values, int periodicity_s);

// Wide CSV layout: header row, first column = time label, one column per
// series. UTF-8, LF line endings, '.' decimal point.
TimePanel read_csv(const std::string& path);
void write_csv(const TimePanel& panel, const std::string& path);

// Canonical number rendering shared by every CSV artifact: fixed (never
// scientific) notation with 12 significant digits; byte-deterministic.
std::string format_number(double x);

// Plain rectangular matrix CSV (no header, no label column).
void write_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace structfact
