// SPDX-License-Identifier: Apache-2.0
#include "svodrive/reward.hpp"

#include <cmath>
#include <numbers>

#include "svodrive/error.hpp"

namespace svo::reward {

RewardBreakdown individual_reward(const sim::VehicleState& next, std::optional<sim::FailureCause> failure,
                                  const RewardWeights& w) {
  RewardBreakdown r;
  r.components["speed"] = w.speed * (next.speed / sim::kMaxSpeed);
  r.components["collision"] = failure == sim::FailureCause::Collision ? w.collision : 0.0;
  r.components["off_zone"] = failure == sim::FailureCause::OffZone ? w.off_zone : 0.0;
  r.components["off_path"] = failure == sim::FailureCause::OffPath ? w.off_path : 0.0;
  r.individual = r.components["speed"] + r.components["collision"] + r.components["off_zone"] + r.components["off_path"];
  r.total = r.individual;
  return r;
}

std::vector<std::size_t> neighborhood(std::span<const Vec2> positions, std::size_t self, double d) {
  std::vector<std::size_t> out;
  const Vec2 p = positions[self];
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (j == self) continue;
    if ((positions[j] - p).norm() <= d) out.push_back(j);
  }
  return out;
}

double mix(double r_individual, double r_social, double svo) {
  if (!(svo >= 0.0 && svo <= 1.0)) throw InputDomainError("SVO outside [0, 1]");
  if (svo == 0.0) return r_individual;
  if (svo == 1.0) return r_social;
  const double angle = std::numbers::pi / 2.0 * svo;
  return std::cos(angle) * r_individual + std::sin(angle) * r_social;
}

RewardBreakdown svo_reward(double r_individual, std::span<const double> neighbor_rewards, double svo) {
  RewardBreakdown r;
  r.individual = r_individual;
  double sum = 0.0;
  for (double v : neighbor_rewards) sum += v;
  r.social = neighbor_rewards.empty() ? 0.0 : sum / static_cast<double>(neighbor_rewards.size());
  r.total = mix(r.individual, r.social, svo);
  return r;
}

std::vector<RewardBreakdown> transition_rewards(const sim::World& after, std::span<const bool> was_active,
                                                const sim::StepEvents& events, const RewardWeights& w,
                                                double radius) {
  const auto& agents = after.agents();
  if (was_active.size() != agents.size()) throw StructuralError("was_active must cover every agent");
  std::vector<std::optional<sim::FailureCause>> failure(agents.size());
  for (const auto& [k, cause] : events.failures) failure[static_cast<std::size_t>(k)] = cause;

  std::vector<RewardBreakdown> out(agents.size());
  std::vector<std::size_t> slots;
  std::vector<Vec2> positions;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    if (!was_active[k]) continue;
    out[k] = individual_reward(agents[k].state, failure[k], w);
    slots.push_back(k);
    positions.push_back(agents[k].state.position);
  }
  std::vector<double> neigh;
  for (std::size_t a = 0; a < slots.size(); ++a) {
    neigh.clear();
    for (std::size_t b : neighborhood(positions, a, radius)) neigh.push_back(out[slots[b]].individual);
    const auto comps = out[slots[a]].components;
    out[slots[a]] = svo_reward(out[slots[a]].individual, neigh, agents[slots[a]].state.svo);
    out[slots[a]].components = comps;
  }
  return out;
}

}  // namespace svo::reward
