// SPDX-License-Identifier: Apache-2.0
#include "svodrive/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "svodrive/error.hpp"

using nlohmann::json;

namespace svo {

NLOHMANN_JSON_SERIALIZE_ENUM(SvoMode, {{SvoMode::TrueSvo, "true_svo"}, {SvoMode::Recog, "recog"}, {SvoMode::NoSvo, "no_svo"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PolicyKind,
                             {{PolicyKind::Scripted, "scripted"}, {PolicyKind::Learned, "learned"}, {PolicyKind::Random, "random"}})

namespace scenario {
NLOHMANN_JSON_SERIALIZE_ENUM(Kind, {{Kind::Bottleneck, "bottleneck"}, {Kind::Merge, "merge"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SvoDistribution::Type, {{SvoDistribution::Type::Uniform, "uniform"},
                                                     {SvoDistribution::Type::Fixed, "fixed"},
                                                     {SvoDistribution::Type::List, "list"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SvoDistribution, type, value, values)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BottleneckGeometry, lanes, throat_lanes, approach_length, throat_length,
                                                exit_length, taper_length)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MergeGeometry, main_lanes, main_length, junction_x, ramp_length,
                                                merge_angle, blend_length)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioSpec, kind, lane_width, bottleneck, merge, min_agents,
                                                max_agents, svo, seed, vehicle_length, vehicle_width, min_gap,
                                                lateral_clearance, spawn_jitter, spawn_end_margin, initial_speed,
                                                max_attempts)
}  // namespace scenario

namespace sim {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PidGains, kp, ki, kd, max_accel, integral_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SimConfig, dt, horizon, pid, wheelbase_ratio, max_path_deviation,
                                                goal_tolerance)
}  // namespace sim

namespace obs {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ObservationConfig, radius, max_neighbors, horizon, static_spacing,
                                                static_crop)
}

namespace reward {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RewardWeights, speed, collision, off_zone, off_path)
}

namespace features {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FeatureScale, position, speed, index, lane_width)
}

namespace decision {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DecisionConfig, vehicle_embed, svo_embed, heads, phi_hidden,
                                                rho_hidden, decoder_hidden, scale, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScriptedConfig, wheelbase, vehicle_length, cruise_speed,
                                                lookahead_min, lookahead_gain, corridor_half_width, gap_base, gap_svo,
                                                headway_base, headway_svo, yield_base, yield_svo, conflict_clearance,
                                                prediction_horizon, prediction_step, courtesy_svo,
                                                courtesy_decel, convergence_scan)
}  // namespace decision

namespace recog {
NLOHMANN_JSON_SERIALIZE_ENUM(Variant, {{Variant::Full, "full"},
                                       {Variant::WithoutMap, "wo_map"},
                                       {Variant::WithoutAttention, "wo_attention"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RecognitionConfig, variant, d_model, heads, phi_hidden, rho_hidden,
                                                decoder_hidden, scale, seed)
}  // namespace recog

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetConfig, episodes, tick_stride, max_observers_per_tick, min_tick)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RecognitionTrainConfig, batch_size, learning_rate, max_epochs, patience,
                                                holdout_fraction, grad_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SacConfig, gamma, learning_rate, batch_size, buffer_size, tau,
                                                initial_alpha, target_entropy, total_steps, warmup_steps, update_every,
                                                updates_per_round, episodes_eval, critic_hidden)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepConfig, svo_values)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, scenario, sim, observation, reward, reward_radius, policy,
                                                policy_checkpoint, decision, scripted, mode, recognition_checkpoint,
                                                recognition, dataset, dataset_path, recognition_training, sac, sweep,
                                                episodes, seed, output_dir, threads, write_logs)

const char* to_string(SvoMode m) {
  switch (m) {
    case SvoMode::TrueSvo:
      return "true_svo";
    case SvoMode::Recog:
      return "recog";
    case SvoMode::NoSvo:
      return "no_svo";
  }
  return "unknown";
}

const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Scripted:
      return "scripted";
    case PolicyKind::Learned:
      return "learned";
    case PolicyKind::Random:
      return "random";
  }
  return "unknown";
}

SvoMode svo_mode_from_string(const std::string& s) {
  for (auto m : {SvoMode::TrueSvo, SvoMode::Recog, SvoMode::NoSvo})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown mode: " + s);
}

PolicyKind policy_kind_from_string(const std::string& s) {
  for (auto p : {PolicyKind::Scripted, PolicyKind::Learned, PolicyKind::Random})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown policy: " + s);
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// Reports the first key present in `given` but absent from the canonical document.
void check_keys(const json& given, const json& canonical, const std::string& where) {
  if (!given.is_object() || !canonical.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (where.empty() && key == "version") continue;
    const std::string path = where.empty() ? key : where + "." + key;
    if (!canonical.contains(key)) throw ConfigError("unknown config key: " + path);
    check_keys(value, canonical.at(key), path);
  }
}

}  // namespace

void validate(const RunConfig& cfg) {
  scenario::validate_spec(cfg.scenario);
  require(cfg.sim.dt > 0.0, "sim.dt must be positive");
  require(cfg.sim.horizon >= 1, "sim.horizon must be at least 1");
  require(cfg.sim.max_path_deviation > 0.0, "sim.max_path_deviation must be positive");
  require(cfg.observation.radius > 0.0, "observation.radius must be positive");
  require(cfg.observation.max_neighbors >= 0, "observation.max_neighbors must be non-negative");
  require(cfg.observation.horizon >= 1, "observation.horizon must be at least 1");
  require(cfg.observation.static_spacing > 0.0, "observation.static_spacing must be positive");
  require(cfg.reward_radius >= 0.0, "reward_radius must be non-negative");
  require(cfg.episodes >= 1, "episodes must be at least 1");
  require(cfg.threads >= 1, "threads must be at least 1");
  require(cfg.mode != SvoMode::Recog || !cfg.recognition_checkpoint.empty(),
          "mode recog requires recognition_checkpoint");
  require(cfg.policy != PolicyKind::Learned || !cfg.policy_checkpoint.empty(),
          "policy learned requires policy_checkpoint");
  require(cfg.recognition.heads >= 1 && cfg.recognition.d_model % cfg.recognition.heads == 0,
          "recognition.heads must divide recognition.d_model");
  require(cfg.decision.heads >= 1 && cfg.decision.d_model() % cfg.decision.heads == 0,
          "decision.heads must divide vehicle_embed + svo_embed");
  require(cfg.dataset.episodes >= 0, "dataset.episodes must be non-negative");
  require(cfg.dataset.tick_stride >= 1, "dataset.tick_stride must be at least 1");
  require(cfg.recognition_training.batch_size >= 1, "recognition_training.batch_size must be at least 1");
  require(cfg.recognition_training.holdout_fraction > 0.0 && cfg.recognition_training.holdout_fraction < 1.0,
          "recognition_training.holdout_fraction must be in (0, 1)");
  require(cfg.sac.gamma >= 0.0 && cfg.sac.gamma < 1.0, "sac.gamma must be in [0, 1)");
  require(cfg.sac.batch_size >= 1 && cfg.sac.buffer_size >= cfg.sac.batch_size,
          "sac.buffer_size must hold at least one batch");
  require(cfg.sac.tau > 0.0 && cfg.sac.tau <= 1.0, "sac.tau must be in (0, 1]");
  for (double v : cfg.sweep.svo_values) require(v >= 0.0 && v <= 1.0, "sweep.svo_values must lie in [0, 1]");
}

std::string config_to_json(const RunConfig& cfg, int indent) {
  json j = cfg;
  j["version"] = kConfigVersion;
  return j.dump(indent);
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  require(j.is_object(), "config must be an object");
  require(j.contains("version"), "config missing version");
  require(j["version"].is_number_integer() && j["version"].get<int>() == kConfigVersion,
          "unsupported config version: " + j["version"].dump());
  RunConfig cfg;
  try {
    cfg = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  check_keys(j, json(cfg), "");
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path.string());
  out << config_to_json(cfg) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::string config_digest(const RunConfig& cfg) {
  // FNV-1a over the canonical compact document, minus settings that cannot change results.
  RunConfig c = cfg;
  c.threads = 1;
  c.output_dir.clear();
  c.write_logs = true;
  const std::string doc = config_to_json(c, -1);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : doc) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::filesystem::path output_directory(const RunConfig& cfg) {
  if (const char* env = std::getenv("SVO_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

}  // namespace svo
