// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svodrive/config.hpp"
#include "svodrive/decision.hpp"
#include "svodrive/observation.hpp"
#include "svodrive/recognition.hpp"
#include "svodrive/reward.hpp"
#include "svodrive/sim.hpp"

namespace svo::harness {

/// Counter-based child seed: independent streams for episode `index` of a run.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

enum class Outcome { Success, Crash, Timeout };
const char* to_string(Outcome o);

/// Recognition output of one observer at one tick.
struct RecognitionRecord {
  int observer = 0;
  std::vector<int> neighbors;
  std::vector<double> estimates;
  std::vector<double> truths;
};

struct TickRecord {
  int tick = 0;  // tick reached after the step
  std::vector<sim::VehicleState> states;
  std::vector<sim::AgentStatus> status;
  std::vector<sim::Action> actions;                               // zero for agents not acting
  std::vector<std::optional<reward::RewardBreakdown>> rewards;    // agents active before the step
  std::vector<RecognitionRecord> recognition;
  std::vector<std::pair<int, sim::FailureCause>> failures;
  std::vector<int> successes;
};

struct AgentSummary {
  int agent_id = 0;
  double svo = 0.0;
  Outcome outcome = Outcome::Timeout;
  std::optional<sim::FailureCause> cause;
  int tick = -1;  // tick at which the outcome was decided
  double episode_return = 0.0;
};

struct EpisodeLog {
  std::string config_digest;
  int episode = 0;
  std::uint64_t seed = 0;
  std::string scenario;
  double dt = 0.1;
  int horizon = 0;
  std::vector<sim::VehicleState> initial;
  std::vector<TickRecord> ticks;
  std::vector<AgentSummary> agents;
};

/// Line-record form: a header line, one line per tick and a summary line.
std::string to_lines(const EpisodeLog& log);
EpisodeLog log_from_lines(const std::string& text);

/// Policy, recogniser and shared map data for a batch of episodes.
struct EpisodeContext {
  std::shared_ptr<decision::Policy> policy;
  std::shared_ptr<recog::RecognitionNet> recognizer;  // optional; estimates are logged whenever present
};

/// Observations of the acting agents at the start of a tick, passed to the tick hook.
struct TickView {
  const sim::World* world = nullptr;
  std::span<const std::size_t> agents;
  std::span<const obs::Observation> observations;
  std::span<const decision::PolicyInput> inputs;
};

using TickHook = std::function<void(const TickView&)>;

/// Builds the policy and recogniser named by the config (checkpoints loaded from disk).
EpisodeContext make_context(const RunConfig& cfg);

/// Simulates one episode of `cfg` with the given seed.
EpisodeLog run_episode(const RunConfig& cfg, std::uint64_t seed, EpisodeContext& ctx, int episode_index = 0,
                       const TickHook& hook = {});

/// Episodes 0..cfg.episodes-1 with seeds derived from cfg.seed.
std::vector<EpisodeLog> run_episodes(const RunConfig& cfg, EpisodeContext& ctx);

/// Per-episode statistics.
struct EpisodeMetrics {
  int agents = 0;
  double success_rate = 0.0;
  double crash_rate = 0.0;
  double timeout_rate = 0.0;
  double collision_rate = 0.0;
  double off_zone_rate = 0.0;
  double off_path_rate = 0.0;
  double speed_score = 0.0;
  double mean_return = 0.0;
  std::optional<double> mean_deviation;
  int recognition_pairs = 0;
};

struct Stat {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

Stat summarize(std::span<const double> values);

struct Metrics {
  std::string label;
  int episodes = 0;
  Stat success_rate;
  Stat crash_rate;
  Stat timeout_rate;
  Stat collision_rate;
  Stat off_zone_rate;
  Stat off_path_rate;
  Stat speed_score;
  Stat mean_return;
  Stat mean_deviation;
  std::vector<double> deviation_by_tick;  // NaN where no pair was recorded
};

EpisodeMetrics episode_metrics(const EpisodeLog& log);
Metrics aggregate(std::span<const EpisodeLog> logs, const std::string& label = "");

/// Runs cfg.episodes episodes and aggregates them.
Metrics evaluate(const RunConfig& cfg, EpisodeContext& ctx, std::vector<EpisodeLog>* logs = nullptr);

}  // namespace svo::harness
