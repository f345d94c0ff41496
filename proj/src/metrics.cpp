// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <cmath>
#include <sstream>

#include "svodrive/error.hpp"
#include "svodrive/export.hpp"

namespace svo::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

namespace {

struct StatColumn {
  const char* name;
  harness::Stat harness::Metrics::*member;
};

constexpr StatColumn kStats[] = {
    {"success", &harness::Metrics::success_rate},   {"crash", &harness::Metrics::crash_rate},
    {"timeout", &harness::Metrics::timeout_rate},   {"collision", &harness::Metrics::collision_rate},
    {"off_zone", &harness::Metrics::off_zone_rate}, {"off_path", &harness::Metrics::off_path_rate},
    {"speed", &harness::Metrics::speed_score},      {"return", &harness::Metrics::mean_return},
    {"mde", &harness::Metrics::mean_deviation},
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_text_cell(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos) throw FormatError("table cell may not contain ',' or newlines");
}

}  // namespace

std::vector<std::string> metrics_columns() {
  std::vector<std::string> c{"label", "scenario", "mode", "svo", "episodes"};
  for (const auto& s : kStats) {
    c.push_back(s.name);
    c.push_back(std::string(s.name) + "_se");
    c.push_back(std::string(s.name) + "_n");
  }
  return c;
}

std::string metrics_table(std::span<const MetricsRow> rows) {
  std::ostringstream os;
  const auto cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rows) {
    check_text_cell(r.label);
    check_text_cell(r.scenario);
    check_text_cell(r.mode);
    os << r.label << "," << r.scenario << "," << r.mode << "," << format_number(r.svo) << "," << r.metrics.episodes;
    for (const auto& s : kStats) {
      const auto& st = r.metrics.*(s.member);
      os << "," << format_number(st.mean) << "," << format_number(st.stderr_) << "," << st.count;
    }
    os << "\n";
  }
  return os.str();
}

std::vector<MetricsRow> parse_metrics_table(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("metrics table has no header");
  const auto cols = metrics_columns();
  if (split(line) != cols) throw FormatError("unexpected metrics table header");
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols.size()) throw FormatError("metrics row has " + std::to_string(cells.size()) + " cells");
    MetricsRow r;
    r.label = cells[0];
    r.scenario = cells[1];
    r.mode = cells[2];
    r.svo = parse_number(cells[3]);
    r.metrics.label = r.label;
    r.metrics.episodes = static_cast<int>(parse_number(cells[4]));
    std::size_t c = 5;
    for (const auto& s : kStats) {
      auto& st = r.metrics.*(s.member);
      st.mean = parse_number(cells[c++]);
      st.stderr_ = parse_number(cells[c++]);
      st.count = static_cast<int>(parse_number(cells[c++]));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string curve_table(const std::string& x_name, const std::string& y_name, std::span<const double> ys) {
  std::ostringstream os;
  os << x_name << "," << y_name << "\n";
  for (std::size_t i = 0; i < ys.size(); ++i) os << i << "," << format_number(ys[i]) << "\n";
  return os.str();
}

}  // namespace svo::io
