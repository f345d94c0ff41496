// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "svodrive/sim.hpp"

namespace svo::scenario {

enum class Kind { Bottleneck, Merge };

struct SvoDistribution {
  enum class Type { Uniform, Fixed, List };
  Type type = Type::Uniform;
  double value = 0.5;          // Fixed
  std::vector<double> values;  // List, indexed by agent id
};

struct BottleneckGeometry {
  int lanes = 3;
  int throat_lanes = 1;
  double approach_length = 60.0;
  double throat_length = 20.0;
  double exit_length = 60.0;
  double taper_length = 20.0;  // carved out of the approach and exit sections
};

struct MergeGeometry {
  int main_lanes = 2;
  double main_length = 120.0;
  double junction_x = 60.0;
  double ramp_length = 60.0;
  double merge_angle = 15.0 * std::numbers::pi / 180.0;
  double blend_length = 10.0;
};

struct ScenarioSpec {
  Kind kind = Kind::Merge;
  double lane_width = 3.5;
  BottleneckGeometry bottleneck;
  MergeGeometry merge;
  int min_agents = 8;
  int max_agents = 20;
  SvoDistribution svo;
  std::uint64_t seed = 0;

  double vehicle_length = 4.6;
  double vehicle_width = 2.0;
  double min_gap = 6.0;            // bumper to bumper, at spawn
  double lateral_clearance = 0.4;  // side to side, at spawn
  double spawn_jitter = 0.25;      // per-slot longitudinal jitter
  double spawn_end_margin = 10.0;  // no spawns this close to a route end
  double initial_speed = 3.0;
  int max_attempts = 1000;
};

/// Throws ConfigError on non-physical parameters.
void validate_spec(const ScenarioSpec& spec);

sim::RoadNetwork build_bottleneck(const ScenarioSpec& spec);
sim::RoadNetwork build_merge(const ScenarioSpec& spec);
/// Dispatches on spec.kind.
sim::RoadNetwork build_network(const ScenarioSpec& spec);

/// Agents with ids 0..n-1, placed collision-free at the start of the episode.
std::vector<sim::Agent> spawn_agents(const sim::RoadNetwork& network, const ScenarioSpec& spec, std::mt19937_64& rng);

const char* to_string(Kind k);

}  // namespace svo::scenario
