// SPDX-License-Identifier: Apache-2.0
#include "svodrive/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svodrive/error.hpp"

namespace svo::scenario {

namespace {

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

// Offsets a centreline sideways; positive offset is to the left of travel.
std::vector<Vec2> offset_points(const Polyline& line, double offset) {
  std::vector<Vec2> out;
  out.reserve(line.size());
  for (const Pose2& p : line.points())
    out.push_back({p.x - std::sin(p.heading) * offset, p.y + std::cos(p.heading) * offset});
  return out;
}

}  // namespace

const char* to_string(Kind k) { return k == Kind::Bottleneck ? "bottleneck" : "merge"; }

void validate_spec(const ScenarioSpec& s) {
  require(s.lane_width > s.vehicle_width, "lane width must exceed vehicle width");
  require(s.vehicle_length > 0.0 && s.vehicle_width > 0.0, "vehicle dimensions must be positive");
  require(s.min_agents >= 1 && s.max_agents <= 64 && s.min_agents <= s.max_agents,
          "agent-count range must lie within [1, 64]");
  require(s.min_gap >= 0.0, "minimum spawn gap must be non-negative");
  require(s.max_attempts >= 1, "max_attempts must be positive");
  require(s.initial_speed >= 0.0 && s.initial_speed <= sim::kMaxSpeed, "initial speed outside [0, 6]");
  if (s.svo.type == SvoDistribution::Type::Fixed)
    require(s.svo.value >= 0.0 && s.svo.value <= 1.0, "fixed SVO outside [0, 1]");
  for (double v : s.svo.values) require(v >= 0.0 && v <= 1.0, "SVO list value outside [0, 1]");
  if (s.kind == Kind::Bottleneck) {
    const auto& g = s.bottleneck;
    require(g.lanes >= 1 && g.throat_lanes >= 1 && g.throat_lanes <= g.lanes, "bottleneck lane counts invalid");
    require(g.approach_length > 0.0 && g.throat_length > 0.0 && g.exit_length > 0.0,
            "bottleneck sections must have positive length");
    require(g.taper_length >= 0.0 && g.taper_length < g.approach_length && g.taper_length < g.exit_length,
            "taper must be shorter than the approach and exit sections");
  } else {
    const auto& g = s.merge;
    require(g.main_lanes >= 1, "merge needs at least one main lane");
    require(g.merge_angle > 0.0 && g.merge_angle < std::numbers::pi / 2.0,
            "merge angle must lie in (0, pi/2)");
    require(g.ramp_length > 0.0 && g.blend_length > 0.0, "ramp lengths must be positive");
    require(g.junction_x > g.blend_length && g.junction_x + g.blend_length < g.main_length,
            "junction must lie inside the main carriageway");
  }
}

sim::RoadNetwork build_bottleneck(const ScenarioSpec& spec) {
  if (spec.kind != Kind::Bottleneck) throw ConfigError("build_bottleneck requires a bottleneck spec");
  validate_spec(spec);
  const auto& g = spec.bottleneck;
  const double lw = spec.lane_width;
  const double throat_start = g.approach_length;
  const double throat_end = g.approach_length + g.throat_length;
  const double total = throat_end + g.exit_length;

  // Blend factor: 0 on the wide sections, 1 inside the throat.
  auto narrowing = [&](double x) {
    if (x <= throat_start - g.taper_length) return 0.0;
    if (x < throat_start) return smoothstep((x - (throat_start - g.taper_length)) / g.taper_length);
    if (x <= throat_end) return 1.0;
    if (x < throat_end + g.taper_length) return 1.0 - smoothstep((x - throat_end) / g.taper_length);
    return 0.0;
  };
  const double wide_half = 0.5 * lw * g.lanes;
  const double narrow_half = 0.5 * lw * g.throat_lanes;
  auto half_width = [&](double x) {
    const double t = narrowing(x);
    return (1.0 - t) * wide_half + t * narrow_half;
  };

  std::vector<double> xs;
  for (double x = 0.0; x < total; x += 1.0) xs.push_back(x);
  xs.push_back(total);

  sim::RoadNetwork net;
  for (int i = 0; i < g.lanes; ++i) {
    const double y_wide = (i - 0.5 * (g.lanes - 1)) * lw;
    const int m = g.lanes == 1 ? 0
                               : static_cast<int>(std::lround(static_cast<double>(i) * (g.throat_lanes - 1) /
                                                              static_cast<double>(g.lanes - 1)));
    const double y_narrow = (m - 0.5 * (g.throat_lanes - 1)) * lw;
    std::vector<Vec2> pts;
    for (double x : xs) {
      const double t = narrowing(x);
      pts.push_back({x, (1.0 - t) * y_wide + t * y_narrow});
    }
    net.centerlines.push_back(Polyline::from_points(pts, lw));
  }
  net.routes = net.centerlines;

  std::vector<Vec2> top, bottom;
  for (double x : xs) {
    top.push_back({x, half_width(x)});
    bottom.push_back({x, -half_width(x)});
  }
  net.sidelines.push_back(Polyline::from_points(top, lw));
  net.sidelines.push_back(Polyline::from_points(bottom, lw));

  Polygon zone = bottom;
  zone.insert(zone.end(), top.rbegin(), top.rend());
  net.drivable.push_back(std::move(zone));
  return net;
}

sim::RoadNetwork build_merge(const ScenarioSpec& spec) {
  if (spec.kind != Kind::Merge) throw ConfigError("build_merge requires a merge spec");
  validate_spec(spec);
  const auto& g = spec.merge;
  const double lw = spec.lane_width;
  const double ca = std::cos(g.merge_angle);
  const double sa = std::sin(g.merge_angle);

  sim::RoadNetwork net;
  for (int i = 0; i < g.main_lanes; ++i) {
    std::vector<Vec2> pts;
    for (double x = 0.0; x < g.main_length; x += 1.0) pts.push_back({x, i * lw});
    pts.push_back({g.main_length, i * lw});
    net.centerlines.push_back(Polyline::from_points(pts, lw));
  }

  // Ramp: straight approach at the merge angle, quadratic blend into lane 0, then lane 0.
  const Vec2 junction{g.junction_x, 0.0};
  const Vec2 b0 = junction - Vec2{ca, sa} * g.blend_length;
  const Vec2 b2 = junction + Vec2{g.blend_length, 0.0};
  const Vec2 start = b0 - Vec2{ca, sa} * g.ramp_length;
  std::vector<Vec2> ramp;
  const int n_straight = std::max(2, static_cast<int>(std::ceil(g.ramp_length)));
  for (int k = 0; k < n_straight; ++k) ramp.push_back(start + (b0 - start) * (static_cast<double>(k) / n_straight));
  const int n_blend = std::max(4, static_cast<int>(std::ceil(2.0 * g.blend_length)));
  for (int k = 0; k <= n_blend; ++k) {
    const double t = static_cast<double>(k) / n_blend;
    ramp.push_back(b0 * ((1 - t) * (1 - t)) + junction * (2 * (1 - t) * t) + b2 * (t * t));
  }
  const Polyline ramp_only = Polyline::from_points(ramp, lw);
  net.centerlines.push_back(ramp_only);

  for (double x = std::floor(b2.x) + 1.0; x < g.main_length; x += 1.0) ramp.push_back({x, 0.0});
  ramp.push_back({g.main_length, 0.0});

  net.routes = std::vector<Polyline>(net.centerlines.begin(), net.centerlines.begin() + g.main_lanes);
  net.routes.push_back(Polyline::from_points(ramp, lw));

  const double top_y = (g.main_lanes - 0.5) * lw;
  const double bottom_y = -0.5 * lw;
  net.sidelines.push_back(Polyline::from_points(std::vector<Vec2>{{0.0, top_y}, {g.main_length, top_y}}, lw));

  const std::vector<Vec2> ramp_left = offset_points(ramp_only, 0.5 * lw);
  const std::vector<Vec2> ramp_right = offset_points(ramp_only, -0.5 * lw);
  // Left ramp edge meets the main road's lower edge; cut it there.
  std::vector<Vec2> left_cut;
  for (const Vec2& p : ramp_left) {
    if (p.y >= bottom_y) break;
    left_cut.push_back(p);
  }
  const double cut_x = left_cut.empty() ? g.junction_x : left_cut.back().x;
  net.sidelines.push_back(Polyline::from_points(std::vector<Vec2>{{0.0, bottom_y}, {cut_x, bottom_y}}, lw));
  net.sidelines.push_back(
      Polyline::from_points(std::vector<Vec2>{{b2.x, bottom_y}, {g.main_length, bottom_y}}, lw));
  if (left_cut.size() >= 2) net.sidelines.push_back(Polyline::from_points(left_cut, lw));
  net.sidelines.push_back(Polyline::from_points(ramp_right, lw));

  net.drivable.push_back(Polygon{{0.0, bottom_y}, {g.main_length, bottom_y}, {g.main_length, top_y}, {0.0, top_y}});
  Polygon ramp_zone = ramp_right;
  ramp_zone.insert(ramp_zone.end(), ramp_left.rbegin(), ramp_left.rend());
  net.drivable.push_back(std::move(ramp_zone));
  return net;
}

sim::RoadNetwork build_network(const ScenarioSpec& spec) {
  return spec.kind == Kind::Bottleneck ? build_bottleneck(spec) : build_merge(spec);
}

std::vector<sim::Agent> spawn_agents(const sim::RoadNetwork& network, const ScenarioSpec& spec,
                                     std::mt19937_64& rng) {
  validate_spec(spec);
  if (network.routes.empty()) throw ConfigError("network has no routes to spawn on");
  std::uniform_int_distribution<int> count_dist(spec.min_agents, spec.max_agents);
  const int n = count_dist(rng);

  // Each route carries a lattice of slots with a random phase; agents pick slots by rejection.
  const double pitch = spec.vehicle_length + spec.min_gap + 2.0 * spec.spawn_jitter;
  struct Slot {
    int route;
    double s;
  };
  std::vector<std::vector<double>> slots(network.routes.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t r = 0; r < network.routes.size(); ++r) {
    const double usable = network.routes[r].length() - spec.spawn_end_margin - 0.5 * spec.vehicle_length;
    const double phase = unit(rng) * pitch;
    for (double s = 0.5 * spec.vehicle_length + spec.spawn_jitter + phase; s <= usable; s += pitch)
      slots[r].push_back(s);
  }

  if (spec.svo.type == SvoDistribution::Type::List && static_cast<int>(spec.svo.values.size()) < n)
    throw ConfigError("SVO list shorter than the number of spawned agents");

  std::vector<sim::Agent> agents;
  std::vector<std::array<Vec2, 4>> inflated;
  std::uniform_int_distribution<int> route_dist(0, static_cast<int>(network.routes.size()) - 1);
  std::uniform_real_distribution<double> jitter(-spec.spawn_jitter, spec.spawn_jitter);
  for (int id = 0; id < n; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const int r = route_dist(rng);
      const auto& cand = slots[static_cast<std::size_t>(r)];
      if (cand.empty()) continue;
      std::uniform_int_distribution<std::size_t> slot_dist(0, cand.size() - 1);
      const double s = cand[slot_dist(rng)] + jitter(rng);
      const Pose2 pose = network.routes[static_cast<std::size_t>(r)].pose_at(s);
      const auto box = rectangle_corners(pose, spec.vehicle_length + spec.min_gap,
                                         spec.vehicle_width + spec.lateral_clearance);
      const bool clash =
          std::any_of(inflated.begin(), inflated.end(), [&](const auto& other) { return rectangles_overlap(box, other); });
      if (clash) continue;
      sim::Agent a;
      a.route = r;
      a.state.position = pose.position();
      a.state.heading = normalize_angle(pose.heading);
      a.state.speed = spec.initial_speed;
      a.state.length = spec.vehicle_length;
      a.state.width = spec.vehicle_width;
      a.state.agent_id = id;
      switch (spec.svo.type) {
        case SvoDistribution::Type::Uniform:
          a.state.svo = unit(rng);
          break;
        case SvoDistribution::Type::Fixed:
          a.state.svo = spec.svo.value;
          break;
        case SvoDistribution::Type::List:
          a.state.svo = spec.svo.values[static_cast<std::size_t>(id)];
          break;
      }
      agents.push_back(std::move(a));
      inflated.push_back(box);
      placed = true;
    }
    if (!placed)
      throw SpawnError("could not place agent " + std::to_string(id) + " of " + std::to_string(n) + " after " +
                       std::to_string(spec.max_attempts) + " attempts (" + std::to_string(agents.size()) +
                       " placed)");
  }
  return agents;
}

}  // namespace svo::scenario
