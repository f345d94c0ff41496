// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <optional>
#include <random>
#include <vector>

#include "svodrive/config.hpp"
#include "svodrive/nn/params.hpp"
#include "svodrive/observation.hpp"
#include "svodrive/decision.hpp"
#include "svodrive/recognition.hpp"
#include "svodrive/sim.hpp"

namespace svo::testing {

/// Single straight lane from (0, 0) to (length, 0).
inline sim::RoadNetwork straight_road(double length = 200.0, double lane_width = 3.5, int lanes = 1) {
  sim::RoadNetwork net;
  for (int l = 0; l < lanes; ++l) {
    const double y = l * lane_width;
    std::vector<Pose2> pts;
    for (double x = 0.0; x <= length + 1e-9; x += 1.0) pts.push_back({x, y, 0.0});
    net.centerlines.emplace_back(pts, lane_width);
    net.routes.emplace_back(pts, lane_width);
  }
  const double lo = -lane_width / 2.0, hi = (lanes - 0.5) * lane_width;
  net.sidelines.emplace_back(std::vector<Pose2>{{0.0, lo, 0.0}, {length, lo, 0.0}}, lane_width);
  net.sidelines.emplace_back(std::vector<Pose2>{{0.0, hi, 0.0}, {length, hi, 0.0}}, lane_width);
  net.drivable.push_back({{0.0, lo}, {length, lo}, {length, hi}, {0.0, hi}});
  return net;
}

inline sim::Agent make_agent(int id, double x, double y, double heading, double speed, int route = 0,
                             double svo = 0.5) {
  sim::Agent a;
  a.state.position = {x, y};
  a.state.heading = heading;
  a.state.speed = speed;
  a.state.agent_id = id;
  a.state.svo = svo;
  a.route = route;
  return a;
}

/// Brute-force overlap on a 1 cm grid over the first rectangle's bounding box.
inline bool sampled_overlap(const sim::VehicleState& a, const sim::VehicleState& b, double step = 0.01) {
  const Frame2 fa(a.pose()), fb(b.pose());
  auto inside = [](const Frame2& f, const sim::VehicleState& v, Vec2 p) {
    const Vec2 q = f.to_local(p);
    return std::abs(q.x) <= v.length / 2.0 && std::abs(q.y) <= v.width / 2.0;
  };
  const auto corners = sim::footprint(a);
  double x0 = corners[0].x, x1 = x0, y0 = corners[0].y, y1 = y0;
  for (const auto& c : corners) {
    x0 = std::min(x0, c.x);
    x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y);
    y1 = std::max(y1, c.y);
  }
  for (double x = x0; x <= x1; x += step)
    for (double y = y0; y <= y1; y += step) {
      const Vec2 p{x, y};
      if (inside(fa, a, p) && inside(fb, b, p)) return true;
    }
  return false;
}

/// Smallest config that runs quickly in tests.
inline RunConfig small_config(scenario::Kind kind, int agents) {
  RunConfig cfg;
  cfg.scenario.kind = kind;
  cfg.scenario.min_agents = agents;
  cfg.scenario.max_agents = agents;
  cfg.episodes = 2;
  cfg.write_logs = false;
  return cfg;
}

/// Recognition network small enough for gradient checks and quick training.
inline recog::RecognitionConfig tiny_recognition(recog::Variant v = recog::Variant::Full, std::uint64_t seed = 3) {
  recog::RecognitionConfig c;
  c.variant = v;
  c.d_model = 16;
  c.heads = 2;
  c.phi_hidden = {16};
  c.rho_hidden = {16};
  c.decoder_hidden = {16};
  c.seed = seed;
  return c;
}

inline decision::DecisionConfig tiny_decision(std::uint64_t seed = 5) {
  decision::DecisionConfig c;
  c.vehicle_embed = 12;
  c.svo_embed = 4;
  c.heads = 2;
  c.phi_hidden = {16};
  c.rho_hidden = {16};
  c.decoder_hidden = {16};
  c.seed = seed;
  return c;
}

/// Synthetic ego-frame observation with 1..max_others neighbours and a few static elements.
inline obs::Observation random_observation(std::mt19937_64& rng, bool with_svo, int max_others = 8,
                                           int max_static = 3, double spread = 30.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), head(-3.14159, 3.14159), speed(0.0, 6.0),
      unit(0.0, 1.0);
  std::uniform_int_distribution<int> n_pts(1, 10), n_others(1, max_others), n_static(0, max_static),
      n_static_pts(2, 12);
  auto vehicle = [&](int index, int agent) {
    obs::PolylineElement e;
    e.kind = obs::ElementKind::Vehicle;
    e.agent_id = agent;
    const int n = n_pts(rng);
    const double svo = unit(rng);
    for (int j = 0; j < n; ++j) {
      obs::PointFeature f;
      f.pose = {pos(rng), pos(rng), head(rng)};
      f.speed = speed(rng);
      if (with_svo) f.aux = svo;
      f.element_index = index;
      f.point_index = j;
      e.points.push_back(f);
    }
    return e;
  };
  obs::Observation o;
  o.with_svo = with_svo;
  o.ego = vehicle(0, 0);
  const int m = n_others(rng);
  for (int i = 1; i <= m; ++i) o.others.push_back(vehicle(i, i));
  const int s = n_static(rng);
  const obs::ElementKind kinds[] = {obs::ElementKind::Centerline, obs::ElementKind::Sideline, obs::ElementKind::Route};
  for (int i = 0; i < s; ++i) {
    obs::PolylineElement e;
    e.kind = kinds[i % 3];
    const int n = n_static_pts(rng);
    for (int j = 0; j < n; ++j) {
      obs::PointFeature f;
      f.pose = {pos(rng), pos(rng), head(rng)};
      f.aux = 3.5;
      f.element_index = i;
      f.point_index = j;
      e.points.push_back(f);
    }
    o.static_elements.push_back(e);
  }
  return o;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  std::string worst;  // parameter name and flat index of the worst entry
};

/// Compares backward() against central differences on `count` randomly chosen parameter entries.
/// The relative error is |a - f| / max(|a|, |f|, floor).
inline GradCheckResult check_gradients(nn::ParamStore& store, const std::function<nn::Var(nn::Tape&)>& loss_fn,
                                       int count, std::uint64_t seed, double h = 1e-4, double floor = 1e-8) {
  struct Entry {
    std::string name;
    Eigen::Index index;
  };
  std::vector<Entry> entries;
  for (const auto& [name, p] : store.entries())
    for (Eigen::Index i = 0; i < p.value.size(); ++i) entries.push_back({name, i});
  std::mt19937_64 rng(seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  entries.resize(std::min<std::size_t>(entries.size(), static_cast<std::size_t>(count)));

  {
    nn::Tape tape;
    nn::backward(tape, loss_fn(tape), store);
  }
  auto value = [&] {
    nn::Tape tape;
    return loss_fn(tape).value()(0, 0);
  };
  GradCheckResult res;
  for (const auto& e : entries) {
    auto& p = store.at(e.name);
    const double analytic = p.grad.data()[e.index];
    const double orig = p.value.data()[e.index];
    p.value.data()[e.index] = orig + h;
    const double up = value();
    p.value.data()[e.index] = orig - h;
    const double down = value();
    p.value.data()[e.index] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst = e.name + "[" + std::to_string(e.index) + "] analytic=" + std::to_string(analytic) +
                  " numeric=" + std::to_string(numeric);
    }
    ++res.checked;
  }
  return res;
}

}  // namespace svo::testing
