// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svodrive/decision.hpp"
#include "svodrive/observation.hpp"
#include "svodrive/recognition.hpp"
#include "svodrive/reward.hpp"
#include "svodrive/scenarios.hpp"
#include "svodrive/sim.hpp"

namespace svo {

inline constexpr int kConfigVersion = 1;

/// Which SVOs the decision policy receives for its neighbours.
enum class SvoMode { TrueSvo, Recog, NoSvo };
enum class PolicyKind { Scripted, Learned, Random };

const char* to_string(SvoMode m);
const char* to_string(PolicyKind p);
SvoMode svo_mode_from_string(const std::string& s);
PolicyKind policy_kind_from_string(const std::string& s);

struct DatasetConfig {
  int episodes = 500;
  int tick_stride = 5;           // record every n-th tick
  int max_observers_per_tick = 0;  // 0 keeps every agent with a neighbour
  int min_tick = 10;             // skip the warm-up ticks
};

struct RecognitionTrainConfig {
  int batch_size = 256;
  double learning_rate = 3e-4;
  int max_epochs = 50;
  int patience = 5;
  double holdout_fraction = 0.1;
  double grad_clip = 1.0;
};

struct SacConfig {
  double gamma = 0.99;
  double learning_rate = 3e-4;
  int batch_size = 256;
  int buffer_size = 200000;
  double tau = 0.005;
  double initial_alpha = 0.2;
  double target_entropy = -2.0;
  int total_steps = 20000;   // environment agent-transitions
  int warmup_steps = 1000;   // random actions before learning
  int update_every = 50;     // transitions between update rounds
  int updates_per_round = 50;
  int episodes_eval = 100;
  std::vector<int> critic_hidden{128, 128};
};

struct SweepConfig {
  std::vector<double> svo_values{0.0, 0.25, 0.5, 0.75, 1.0};
};

struct RunConfig {
  scenario::ScenarioSpec scenario;
  sim::SimConfig sim;
  obs::ObservationConfig observation;
  reward::RewardWeights reward;
  double reward_radius = 30.0;

  PolicyKind policy = PolicyKind::Scripted;
  std::string policy_checkpoint;
  decision::DecisionConfig decision;
  decision::ScriptedConfig scripted;

  SvoMode mode = SvoMode::TrueSvo;
  std::string recognition_checkpoint;
  recog::RecognitionConfig recognition;

  DatasetConfig dataset;
  std::string dataset_path;
  RecognitionTrainConfig recognition_training;
  SacConfig sac;
  SweepConfig sweep;

  int episodes = 200;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int threads = 1;
  bool write_logs = true;
};

/// Throws ConfigError describing the first invalid field.
void validate(const RunConfig& cfg);

std::string config_to_json(const RunConfig& cfg, int indent = 2);
/// Parses a config document; absent keys keep their defaults. Throws ConfigError on unknown
/// versions, wrong types or invalid values.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Stable hex digest of the canonical config document; threads and output location are ignored.
std::string config_digest(const RunConfig& cfg);

/// Output directory after applying the SVO_OUTPUT_DIR override.
std::filesystem::path output_directory(const RunConfig& cfg);

}  // namespace svo
