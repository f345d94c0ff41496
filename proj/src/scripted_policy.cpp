// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "svodrive/decision.hpp"

namespace svo::decision {

namespace {

const obs::PolylineElement* find_route(const obs::Observation& o) {
  for (const auto& e : o.static_elements)
    if (e.kind == obs::ElementKind::Route) return &e;
  return nullptr;
}

double following_speed(double gap, double svo, const ScriptedConfig& cfg) {
  const double s0 = cfg.gap_base + cfg.gap_svo * svo;
  const double headway = cfg.headway_base + cfg.headway_svo * svo;
  return std::max(0.0, (gap - s0) / headway);
}

/// Route distance from the ego to the first point where another lane centerline joins the route.
std::optional<double> convergence_ahead(const obs::Observation& o, const Polyline& route, double s_ego,
                                        double scan) {
  std::optional<double> best;
  for (const auto& e : o.static_elements) {
    if (e.kind != obs::ElementKind::Centerline || e.points.size() < 2) continue;
    const double join = 0.5 * e.points.front().aux.value_or(3.5);
    std::vector<Pose2> pts;
    pts.reserve(e.points.size());
    for (const auto& p : e.points) pts.push_back(p.pose);
    const Polyline lane(std::move(pts), 1.0);
    if (lane.project(route.pose_at(s_ego).position()).distance < join) continue;
    for (double ds = 0.0; ds <= scan; ds += 1.0) {
      if (best && ds >= *best) break;
      const double s = s_ego + ds;
      if (s > route.length()) break;
      if (lane.project(route.pose_at(s).position()).distance < join) {
        best = ds;
        break;
      }
    }
  }
  return best;
}

}  // namespace

PolicyOutput scripted_policy(const obs::Observation& observation, double self_svo, const ScriptedConfig& cfg,
                             ScriptedDiagnostics* diag) {
  const double speed = observation.ego.points.empty() ? 0.0 : observation.ego.points.back().speed;
  double target = cfg.cruise_speed;
  double steering = 0.0;
  int yielded = 0;
  std::optional<double> leader_gap;
  std::optional<double> convergence;

  const auto* route_el = find_route(observation);
  if (route_el != nullptr && route_el->points.size() >= 2) {
    std::vector<Pose2> pts;
    pts.reserve(route_el->points.size());
    for (const auto& p : route_el->points) pts.push_back(p.pose);
    const Polyline route(std::move(pts), 1.0);
    const double s_ego = route.project({0.0, 0.0}).arc_length;

    const double lookahead = std::max(cfg.lookahead_min, cfg.lookahead_gain * speed);
    const Pose2 aim = route.pose_at(s_ego + lookahead);
    const double ld = std::max(std::hypot(aim.x, aim.y), 1e-6);
    const double alpha = std::atan2(aim.y, aim.x);
    steering = std::atan(2.0 * cfg.wheelbase * std::sin(alpha) / ld);
    steering = std::clamp(steering, -sim::kMaxSteer, sim::kMaxSteer);

    convergence = convergence_ahead(observation, route, s_ego, cfg.convergence_scan);
    if (convergence) {
      const double v_join = cfg.cruise_speed * (1.0 - cfg.courtesy_svo * self_svo);
      target = std::min(target, std::sqrt(v_join * v_join + 2.0 * cfg.courtesy_decel * *convergence));
    }

    const double own_speed = std::max(speed, 1.0);
    const int steps = static_cast<int>(std::round(cfg.prediction_horizon / cfg.prediction_step));
    for (const auto& other : observation.others) {
      if (other.points.empty()) continue;
      const auto& last = other.points.back();
      const Vec2 p = last.pose.position();
      const auto proj = route.project(p);
      if (proj.distance < cfg.corridor_half_width) {
        if (proj.arc_length > s_ego) {
          const double gap = proj.arc_length - s_ego - cfg.vehicle_length;
          if (!leader_gap || gap < *leader_gap) leader_gap = gap;
          target = std::min(target, following_speed(gap, self_svo, cfg));
        }
        continue;
      }
      if (last.speed <= 0.0) continue;
      const Vec2 dir{std::cos(last.pose.heading), std::sin(last.pose.heading)};
      for (int k = 1; k <= steps; ++k) {
        const double t = k * cfg.prediction_step;
        const auto pp = route.project(p + dir * (last.speed * t));
        if (pp.distance >= cfg.corridor_half_width) continue;
        if (pp.arc_length > s_ego) {
          const double t_me = (pp.arc_length - s_ego) / own_speed;
          const double tau = cfg.yield_base + cfg.yield_svo * self_svo;
          if (t - t_me < tau) {
            const double gap = pp.arc_length - s_ego - cfg.vehicle_length - cfg.conflict_clearance;
            target = std::min(target, following_speed(gap, self_svo, cfg));
            ++yielded;
          }
        }
        break;
      }
    }
  }

  target = std::clamp(target, 0.0, sim::kMaxSpeed);
  if (diag != nullptr) *diag = {target, steering, yielded, leader_gap, convergence};
  PolicyOutput out;
  out.action = sim::unmap_action({target, steering});
  for (double& a : out.action) a = std::clamp(a, -1.0, 1.0);
  return out;
}

std::vector<PolicyOutput> ScriptedPolicy::act(std::span<const PolicyInput> inputs, std::mt19937_64&) {
  std::vector<PolicyOutput> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(scripted_policy(*in.observation, in.self_svo, cfg_));
  return out;
}

}  // namespace svo::decision
