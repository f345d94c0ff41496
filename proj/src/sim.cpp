// SPDX-License-Identifier: Apache-2.0
#include "svodrive/sim.hpp"

#include <algorithm>
#include <cmath>

#include "svodrive/error.hpp"

namespace svo::sim {

ControlSetpoint map_action(const Action& a) {
  for (double v : a) {
    if (!(v >= -1.0 && v <= 1.0)) throw InputDomainError("action component outside [-1, 1]");
  }
  return {kMaxSpeed / 2.0 * (a[0] + 1.0), kMaxSteer * a[1]};
}

Action unmap_action(const ControlSetpoint& sp) {
  if (!(sp.target_speed >= 0.0 && sp.target_speed <= kMaxSpeed))
    throw InputDomainError("target speed outside [0, 6]");
  if (!(std::abs(sp.steering_angle) <= kMaxSteer)) throw InputDomainError("steering outside [-pi/4, pi/4]");
  return {sp.target_speed / (kMaxSpeed / 2.0) - 1.0, sp.steering_angle / kMaxSteer};
}

PidOutput pid_step(const VehicleState& state, const ControlSetpoint& setpoint, const PidState& pid,
                   const PidGains& gains, double dt) {
  const double error = setpoint.target_speed - state.speed;
  PidState next = pid;
  next.integral = std::clamp(pid.integral + error * dt, -gains.integral_limit, gains.integral_limit);
  const double derivative = pid.has_prev ? (error - pid.prev_error) / dt : 0.0;
  next.prev_error = error;
  next.has_prev = true;
  double acc = gains.kp * error + gains.ki * next.integral + gains.kd * derivative;
  acc = std::clamp(acc, -gains.max_accel, gains.max_accel);
  return {acc, setpoint.steering_angle, next};
}

VehicleState bicycle_step(const VehicleState& s, double acceleration, double steering, double dt,
                          double wheelbase) {
  VehicleState n = s;
  n.position.x += s.speed * std::cos(s.heading) * dt;
  n.position.y += s.speed * std::sin(s.heading) * dt;
  n.heading = normalize_angle(s.heading + s.speed / wheelbase * std::tan(steering) * dt);
  n.speed = std::clamp(s.speed + acceleration * dt, 0.0, kMaxSpeed);
  return n;
}

VehicleState bicycle_step(const VehicleState& s, double acceleration, double steering, double dt) {
  return bicycle_step(s, acceleration, steering, dt, 0.8 * s.length);
}

std::array<Vec2, 4> footprint(const VehicleState& v) { return rectangle_corners(v.pose(), v.length, v.width); }

std::vector<std::pair<int, int>> detect_collisions(std::span<const VehicleState> vehicles) {
  std::vector<std::pair<int, int>> out;
  std::vector<std::array<Vec2, 4>> corners;
  corners.reserve(vehicles.size());
  for (const auto& v : vehicles) corners.push_back(footprint(v));
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < vehicles.size(); ++j) {
      // bounding-circle reject
      const double reach = 0.5 * (std::hypot(vehicles[i].length, vehicles[i].width) +
                                  std::hypot(vehicles[j].length, vehicles[j].width));
      if ((vehicles[i].position - vehicles[j].position).norm() > reach) continue;
      if (rectangles_overlap(corners[i], corners[j])) {
        const int a = vehicles[i].agent_id;
        const int b = vehicles[j].agent_id;
        out.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool RoadNetwork::in_drivable_zone(Vec2 p) const {
  return std::any_of(drivable.begin(), drivable.end(), [&](const Polygon& poly) { return polygon_contains(poly, p); });
}

std::vector<std::string> validate(const RoadNetwork& net, double sample_spacing) {
  std::vector<std::string> issues;
  auto check_lines = [&](const std::vector<Polyline>& lines, const char* what) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].size() < 2) issues.push_back(std::string(what) + " " + std::to_string(i) + " has fewer than 2 points");
      if (!(lines[i].lane_width() > 0.0))
        issues.push_back(std::string(what) + " " + std::to_string(i) + " has non-positive lane width");
    }
  };
  check_lines(net.centerlines, "centerline");
  check_lines(net.sidelines, "sideline");
  check_lines(net.routes, "route");
  if (net.routes.empty()) issues.emplace_back("network has no routes");
  if (net.drivable.empty()) issues.emplace_back("network has no drivable zone");
  for (std::size_t i = 0; i < net.routes.size(); ++i) {
    const Polyline& r = net.routes[i];
    if (r.size() < 2) continue;
    for (double s = 0.0; s <= r.length(); s += sample_spacing) {
      const Pose2 p = r.pose_at(s);
      if (!net.in_drivable_zone(p.position())) {
        issues.push_back("route " + std::to_string(i) + " leaves the drivable zone at s=" + std::to_string(s));
        break;
      }
    }
  }
  return issues;
}

const char* to_string(FailureCause c) {
  switch (c) {
    case FailureCause::Collision:
      return "collision";
    case FailureCause::OffZone:
      return "off_zone";
    case FailureCause::OffPath:
      return "off_path";
  }
  return "unknown";
}

std::optional<FailureCause> failure_from_string(const std::string& s) {
  if (s == "collision") return FailureCause::Collision;
  if (s == "off_zone") return FailureCause::OffZone;
  if (s == "off_path") return FailureCause::OffPath;
  return std::nullopt;
}

std::optional<FailureCause> check_failures(const VehicleState& vehicle, const RoadNetwork& network,
                                           const Polyline& path, double max_path_deviation) {
  if (!network.in_drivable_zone(vehicle.position)) return FailureCause::OffZone;
  if (path.project(vehicle.position).distance > max_path_deviation) return FailureCause::OffPath;
  return std::nullopt;
}

World::World(RoadNetwork network, std::vector<Agent> agents, SimConfig config, std::uint64_t seed)
    : network_(std::move(network)), agents_(std::move(agents)), config_(config), seed_(seed), rng_(seed) {
  if (!(config_.dt > 0.0)) throw ConfigError("dt must be positive");
  for (auto& a : agents_) {
    if (a.route < 0 || static_cast<std::size_t>(a.route) >= network_.routes.size())
      throw ConfigError("agent route index out of range");
    if (a.history.empty()) a.history.push_back({a.state.pose(), a.state.speed});
  }
}

bool World::all_done() const {
  return std::none_of(agents_.begin(), agents_.end(), [](const Agent& a) { return a.status == AgentStatus::Active; });
}

std::size_t World::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(agents_.begin(), agents_.end(), [](const Agent& a) { return a.status == AgentStatus::Active; }));
}

double World::progress(std::size_t k) const {
  const Agent& a = agents_.at(k);
  return network_.routes[static_cast<std::size_t>(a.route)].project(a.state.position).arc_length;
}

std::vector<VehicleState> World::obstacles() const {
  std::vector<VehicleState> out;
  for (const auto& a : agents_)
    if (a.status != AgentStatus::Success) out.push_back(a.state);
  return out;
}

StepEvents World::step(std::span<const Action> actions) {
  if (actions.size() != agents_.size()) throw StructuralError("one action per agent required");
  const double dt = config_.dt;
  for (std::size_t k = 0; k < agents_.size(); ++k) {
    Agent& a = agents_[k];
    if (a.status != AgentStatus::Active) continue;
    const ControlSetpoint sp = map_action(actions[k]);
    const PidOutput ctl = pid_step(a.state, sp, a.pid, config_.pid, dt);
    a.pid = ctl.state;
    a.state = bicycle_step(a.state, ctl.acceleration, ctl.steering, dt, config_.wheelbase_ratio * a.state.length);
  }
  ++tick_;

  StepEvents ev;
  std::vector<std::optional<FailureCause>> cause(agents_.size());

  std::vector<VehicleState> present;
  std::vector<std::size_t> slot_of;
  for (std::size_t k = 0; k < agents_.size(); ++k) {
    if (agents_[k].status == AgentStatus::Success) continue;
    present.push_back(agents_[k].state);
    present.back().agent_id = static_cast<int>(k);
    slot_of.push_back(k);
  }
  for (const auto& [i, j] : detect_collisions(present)) {
    for (int k : {i, j}) {
      if (agents_[static_cast<std::size_t>(k)].status == AgentStatus::Active)
        cause[static_cast<std::size_t>(k)] = FailureCause::Collision;
    }
  }

  for (std::size_t k = 0; k < agents_.size(); ++k) {
    Agent& a = agents_[k];
    if (a.status != AgentStatus::Active) continue;
    const Polyline& path = network_.routes[static_cast<std::size_t>(a.route)];
    if (!cause[k]) cause[k] = check_failures(a.state, network_, path, config_.max_path_deviation);
    a.history.push_back({a.state.pose(), a.state.speed});
    if (cause[k]) {
      a.status = AgentStatus::Crashed;
      a.cause = cause[k];
      a.done_tick = tick_;
      a.state.speed = 0.0;  // frozen in place
      ev.failures.emplace_back(static_cast<int>(k), *cause[k]);
    } else if (path.project(a.state.position).arc_length >= path.length() - config_.goal_tolerance) {
      a.status = AgentStatus::Success;
      a.done_tick = tick_;
      ev.successes.push_back(static_cast<int>(k));
    }
  }
  return ev;
}

}  // namespace svo::sim
