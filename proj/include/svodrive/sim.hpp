// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svodrive/geometry.hpp"

namespace svo::sim {

inline constexpr double kMaxSpeed = 6.0;
inline constexpr double kMaxSteer = std::numbers::pi / 4.0;

struct VehicleState {
  Vec2 position;
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;    // [0, kMaxSpeed]
  double length = 4.6;
  double width = 2.0;
  int agent_id = 0;
  double svo = 0.0;  // ground truth, never exposed to recognition inputs

  Pose2 pose() const { return {position.x, position.y, heading}; }
};

struct ControlSetpoint {
  double target_speed = 0.0;    // m/s in [0, 6]
  double steering_angle = 0.0;  // rad in [-pi/4, pi/4]
};

/// Normalised policy action: [speed, steering] in [-1, 1]^2.
using Action = std::array<double, 2>;

/// Affine map from the normalised action box to physical setpoints.
ControlSetpoint map_action(const Action& a);
/// Inverse of map_action.
Action unmap_action(const ControlSetpoint& sp);

struct PidGains {
  double kp = 2.0;
  double ki = 0.1;
  double kd = 0.0;
  double max_accel = 3.0;
  double integral_limit = 5.0;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

struct PidOutput {
  double acceleration = 0.0;
  double steering = 0.0;
  PidState state;
};

/// Speed-tracking PID with anti-windup; steering passes through.
PidOutput pid_step(const VehicleState& state, const ControlSetpoint& setpoint, const PidState& pid,
                   const PidGains& gains, double dt);

/// Kinematic bicycle update with explicit wheelbase.
VehicleState bicycle_step(const VehicleState& state, double acceleration, double steering, double dt,
                          double wheelbase);
/// Same, with wheelbase = 0.8 * vehicle length.
VehicleState bicycle_step(const VehicleState& state, double acceleration, double steering, double dt);

std::array<Vec2, 4> footprint(const VehicleState& v);

/// Unordered overlapping pairs as (smaller id, larger id), sorted.
std::vector<std::pair<int, int>> detect_collisions(std::span<const VehicleState> vehicles);

struct RoadNetwork {
  std::vector<Polyline> centerlines;
  std::vector<Polyline> sidelines;
  std::vector<Polyline> routes;  // global paths; agents index into this
  std::vector<Polygon> drivable;

  bool in_drivable_zone(Vec2 p) const;
};

/// Returns a human-readable list of violated network invariants (empty when valid).
std::vector<std::string> validate(const RoadNetwork& net, double sample_spacing = 1.0);

enum class FailureCause { Collision, OffZone, OffPath };

const char* to_string(FailureCause c);
std::optional<FailureCause> failure_from_string(const std::string& s);

/// Zone and path checks; collisions are detected pairwise by detect_collisions.
std::optional<FailureCause> check_failures(const VehicleState& vehicle, const RoadNetwork& network,
                                           const Polyline& path, double max_path_deviation);

struct SimConfig {
  double dt = 0.1;
  int horizon = 130;
  PidGains pid;
  double wheelbase_ratio = 0.8;
  double max_path_deviation = 4.0;
  double goal_tolerance = 1.0;  // success when this close (arc length) to the path end
};

enum class AgentStatus { Active, Success, Crashed };

struct TrajectorySample {
  Pose2 pose;
  double speed = 0.0;
};

struct Agent {
  VehicleState state;
  int route = 0;
  AgentStatus status = AgentStatus::Active;
  std::optional<FailureCause> cause;
  int done_tick = -1;
  PidState pid;
  std::vector<TrajectorySample> history;  // one entry per tick the agent has been simulated
};

struct StepEvents {
  std::vector<std::pair<int, FailureCause>> failures;  // agent index, cause
  std::vector<int> successes;                          // agent index
};

/// Single-writer world; step() advances every active agent simultaneously.
class World {
 public:
  World(RoadNetwork network, std::vector<Agent> agents, SimConfig config, std::uint64_t seed);

  int tick() const { return tick_; }
  const SimConfig& config() const { return config_; }
  const RoadNetwork& network() const { return network_; }
  const std::vector<Agent>& agents() const { return agents_; }
  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& rng() { return rng_; }

  bool all_done() const;
  std::size_t active_count() const;

  /// Advances one tick. `actions[k]` drives agent k; entries for finished agents are ignored.
  StepEvents step(std::span<const Action> actions);

  /// Progress along the agent's route, in metres.
  double progress(std::size_t k) const;
  /// Vehicles that still occupy the road (active or frozen after a crash).
  std::vector<VehicleState> obstacles() const;

 private:
  RoadNetwork network_;
  std::vector<Agent> agents_;
  SimConfig config_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  int tick_ = 0;
};

}  // namespace svo::sim
