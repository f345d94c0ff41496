// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "svodrive/harness.hpp"

namespace svo::io {

/// One row of a metrics table; `svo` is NaN unless the row belongs to a fixed-SVO sweep.
struct MetricsRow {
  std::string label;
  std::string scenario;
  std::string mode;
  double svo = std::numeric_limits<double>::quiet_NaN();
  harness::Metrics metrics;
};

/// Comma-separated table with a header line. Numbers use shortest round-trip formatting, so
/// parse_metrics_table(metrics_table(rows)) reproduces every value exactly.
std::string metrics_table(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_table(const std::string& text);
std::vector<std::string> metrics_columns();

/// Two-column table of a per-tick curve.
std::string curve_table(const std::string& x_name, const std::string& y_name, std::span<const double> ys);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars
};

/// Stand-alone SVG line chart. NaN points break the line.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const Series> series);

/// Writes text to `path`, creating parent directories. Throws IoError with the path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Episode logs in the line-record format, one file per episode: episode_00000.log, ...
void write_logs(const std::filesystem::path& dir, std::span<const harness::EpisodeLog> logs);

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);
double parse_number(const std::string& s);

}  // namespace svo::io
