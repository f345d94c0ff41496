// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svodrive/sim.hpp"

namespace svo::reward {

struct RewardWeights {
  double speed = 0.1;  // per tick at full speed
  double collision = -10.0;
  double off_zone = -10.0;
  double off_path = -5.0;
};

struct RewardBreakdown {
  double individual = 0.0;
  double social = 0.0;
  double total = 0.0;
  std::map<std::string, double> components;  // speed, collision, off_zone, off_path
};

/// Per-tick driving reward of an agent that was active before the step.
/// `failure` is the cause reported on this transition, if any.
RewardBreakdown individual_reward(const sim::VehicleState& next, std::optional<sim::FailureCause> failure,
                                  const RewardWeights& w);

/// Indices (into `positions`) of the agents other than `self` within Euclidean distance d (closed ball).
std::vector<std::size_t> neighborhood(std::span<const Vec2> positions, std::size_t self, double d);

/// Mixes own and neighbourhood-average reward by the SVO angle; throws InputDomainError when
/// svo is outside [0, 1]. An empty neighbourhood contributes a social reward of 0.
RewardBreakdown svo_reward(double r_individual, std::span<const double> neighbor_rewards, double svo);

/// Same mixing with a precomputed social term.
double mix(double r_individual, double r_social, double svo);

/// Rewards for every agent that was active before a world step.
/// `was_active[k]` flags agents taking part in the transition; results for others are zero.
std::vector<RewardBreakdown> transition_rewards(const sim::World& after, std::span<const bool> was_active,
                                                const sim::StepEvents& events, const RewardWeights& w,
                                                double radius);

}  // namespace svo::reward
