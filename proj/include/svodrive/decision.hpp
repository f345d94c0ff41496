// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "svodrive/features.hpp"
#include "svodrive/nn/layers.hpp"
#include "svodrive/observation.hpp"
#include "svodrive/sim.hpp"

namespace svo::decision {

/// What a decision policy sees for one agent. SVOs are supplied separately from the
/// observation so that true and estimated values share the same input slot.
struct PolicyInput {
  const obs::Observation* observation = nullptr;
  double self_svo = 0.0;
  std::vector<double> neighbor_svos;  // aligned with observation->others
};

struct PolicyOutput {
  sim::Action action{0.0, 0.0};
  std::optional<std::array<double, 2>> mean;
  std::optional<std::array<double, 2>> log_std;
};

/// Throws StructuralError when the SVO vector is misaligned or out of [0, 1].
void check_input(const PolicyInput& in);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// One output per input. `rng` is the episode generator; deterministic policies ignore it.
  virtual std::vector<PolicyOutput> act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) = 0;
};

// ---------------------------------------------------------------------------------------------
// Learned policy

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct DecisionConfig {
  int vehicle_embed = 128;
  int svo_embed = 32;
  int heads = 4;
  std::vector<int> phi_hidden{128, 128};
  std::vector<int> rho_hidden{128};
  std::vector<int> decoder_hidden{128, 128};
  features::FeatureScale scale;
  std::uint64_t seed = 0;

  int d_model() const { return vehicle_embed + svo_embed; }
};

/// Encoder shared by actor and critic: vehicle DeepSet features concatenated with a linear SVO
/// projection, static DeepSet features, and one ego query pooling over all of them.
class DecisionTrunk {
 public:
  DecisionTrunk() = default;
  DecisionTrunk(nn::ParamStore& store, const std::string& name, const DecisionConfig& cfg);

  /// One pooled row (d_model wide) per input.
  nn::Var encode(nn::Tape& tape, nn::ParamStore& store, std::span<const PolicyInput* const> batch) const;

 private:
  DecisionConfig cfg_;
  nn::DeepSetEncoder vehicle_enc_;
  nn::Linear svo_proj_;
  nn::DeepSetEncoder static_enc_;
  nn::MultiHeadAttention mha_;
};

/// Single-query attention policy. `outputs` = 2 (deterministic mean) or 4 (mean, log-std).
class DecisionNet {
 public:
  explicit DecisionNet(const DecisionConfig& cfg, int outputs = 4);

  const DecisionConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  int outputs() const { return outputs_; }

  /// Raw head output, one row per input (pre-squash mean, then log-std when present).
  nn::Var forward(nn::Tape& tape, std::span<const PolicyInput* const> batch);
  /// Deterministic action tanh(mean), plus statistics when the head is stochastic.
  PolicyOutput decide(const PolicyInput& in);
  std::vector<PolicyOutput> decide(std::span<const PolicyInput> inputs);

  void save(const std::string& path) const { params_.save(path); }
  void load(const std::string& path) { params_.load_values(nn::ParamStore::load(path)); }

 private:
  DecisionConfig cfg_;
  int outputs_;
  nn::ParamStore params_;
  DecisionTrunk trunk_;
  nn::Mlp head_;
};

class LearnedPolicy : public Policy {
 public:
  explicit LearnedPolicy(std::shared_ptr<DecisionNet> net, bool stochastic = false)
      : net_(std::move(net)), stochastic_(stochastic) {}
  std::string name() const override { return "learned"; }
  std::vector<PolicyOutput> act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) override;

 private:
  std::shared_ptr<DecisionNet> net_;
  bool stochastic_;
};

class RandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  std::vector<PolicyOutput> act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) override;
};

// ---------------------------------------------------------------------------------------------
// Scripted heterogeneous-behaviour policy

/// Gap keeping and conflict yielding parameterised by the agent's own SVO. Every
/// SVO-dependent quantity is monotone so that target speed never increases with SVO.
struct ScriptedConfig {
  double wheelbase = 0.8 * 4.6;
  double vehicle_length = 4.6;
  double cruise_speed = sim::kMaxSpeed;
  double lookahead_min = 4.0;
  double lookahead_gain = 1.0;  // s
  double corridor_half_width = 2.2;
  // Standstill gap s0 = gap_base + gap_svo * svo; time headway T = headway_base + headway_svo * svo.
  double gap_base = 1.5;
  double gap_svo = 2.5;
  double headway_base = 0.8;
  double headway_svo = 1.2;
  // Yield when (other's time to conflict) - (own time to conflict) < yield_base + yield_svo * svo.
  double yield_base = -1.0;
  double yield_svo = 2.5;
  double conflict_clearance = 1.5;
  double prediction_horizon = 5.0;  // s
  double prediction_step = 0.1;     // s
  double courtesy_svo = 0.5;        // fraction of cruise speed shed at a lane convergence when phi = 1
  double courtesy_decel = 1.5;      // m/s^2
  double convergence_scan = 40.0;   // m of route searched for a converging lane
};

struct ScriptedDiagnostics {
  double target_speed = 0.0;
  double steering = 0.0;
  int yielded_conflicts = 0;
  std::optional<double> leader_gap;
  std::optional<double> convergence_distance;
};

/// Pure-pursuit path following with SVO-dependent longitudinal control. Reads only geometry.
PolicyOutput scripted_policy(const obs::Observation& observation, double self_svo, const ScriptedConfig& cfg = {},
                             ScriptedDiagnostics* diag = nullptr);

class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(ScriptedConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "scripted"; }
  std::vector<PolicyOutput> act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) override;

 private:
  ScriptedConfig cfg_;
};

}  // namespace svo::decision
