// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "svodrive/config.hpp"
#include "svodrive/decision.hpp"
#include "svodrive/harness.hpp"

namespace svo::sac {

/// One agent's transition. Observations are shared between consecutive transitions.
struct Transition {
  std::shared_ptr<const obs::Observation> observation;
  std::vector<double> neighbor_svos;
  double self_svo = 0.0;
  sim::Action action{0.0, 0.0};
  double reward_individual = 0.0;
  double reward_social = 0.0;
  double reward = 0.0;  // SVO-mixed
  std::shared_ptr<const obs::Observation> next_observation;  // equals observation when done
  std::vector<double> next_neighbor_svos;
  bool done = false;

  decision::PolicyInput input() const { return {observation.get(), self_svo, neighbor_svos}; }
  decision::PolicyInput next_input() const { return {next_observation.get(), self_svo, next_neighbor_svos}; }
};

/// Fixed-capacity ring buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  /// Uniform draw with replacement.
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

/// Q(s, a): decision trunk features concatenated with the action, then an MLP to one value.
class CriticNet {
 public:
  CriticNet(const decision::DecisionConfig& cfg, const std::vector<int>& hidden, std::uint64_t seed);

  nn::ParamStore& params() { return params_; }
  nn::Var forward(nn::Tape& tape, nn::ParamStore& store, std::span<const decision::PolicyInput* const> batch,
                  nn::Var actions) const;

 private:
  nn::ParamStore params_;
  decision::DecisionTrunk trunk_;
  nn::Mlp head_;
};

/// Actions and log-probabilities of the tanh-squashed Gaussian policy for given standard-normal noise.
struct SquashedSample {
  nn::Var action;    // B x 2, in (-1, 1)
  nn::Var log_prob;  // B x 1
};
SquashedSample squashed_sample(nn::Var raw, const nn::Matrix& noise);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
};

/// Twin-critic soft actor-critic with target critics and automatic temperature.
class SacLearner {
 public:
  SacLearner(const decision::DecisionConfig& policy, const SacConfig& cfg, std::uint64_t seed);

  std::shared_ptr<decision::DecisionNet> actor() { return actor_; }
  CriticNet& critic(int i) { return i == 0 ? q1_ : q2_; }
  nn::ParamStore& target_params(int i) { return i == 0 ? q1_target_ : q2_target_; }
  double alpha() const;

  /// Sum of both critics' squared Bellman errors for a minibatch, with next-action noise supplied.
  nn::Var critic_loss(nn::Tape& tape, std::span<const Transition* const> batch, const nn::Matrix& next_noise);
  UpdateStats update(std::span<const Transition* const> batch, std::mt19937_64& rng);

 private:
  SacConfig cfg_;
  std::shared_ptr<decision::DecisionNet> actor_;
  CriticNet q1_, q2_;
  nn::ParamStore q1_target_, q2_target_;
  nn::ParamStore log_alpha_;
  nn::Adam actor_opt_, q1_opt_, q2_opt_, alpha_opt_;
};

struct SacResult {
  std::shared_ptr<decision::DecisionNet> policy;
  std::vector<double> episode_returns;  // mean per-agent return of each training episode
  std::vector<UpdateStats> updates;
  long transitions = 0;
};

using EpisodeCallback = std::function<void(int episode, double mean_return, long transitions)>;

/// Shared-policy SAC over all agents' experience. Throws TrainingError on divergence.
SacResult sac_train(const RunConfig& cfg, std::uint64_t seed, const EpisodeCallback& on_episode = {});

/// Acting agent's input at one tick, captured during a rollout.
struct CapturedStep {
  std::size_t agent = 0;
  std::shared_ptr<const obs::Observation> observation;
  double self_svo = 0.0;
  std::vector<double> neighbor_svos;
};

/// Transitions of one finished episode. Agents still en route at the final tick contribute no
/// transition for it (there is no successor observation).
std::vector<Transition> episode_transitions(const harness::EpisodeLog& log,
                                            const std::vector<std::vector<CapturedStep>>& ticks);

/// Mean episodic return of a policy over `episodes` seeds derived from `seed`, one value per episode.
std::vector<double> episode_returns(const RunConfig& cfg, harness::EpisodeContext& ctx, int episodes,
                                    std::uint64_t seed);

}  // namespace svo::sac
