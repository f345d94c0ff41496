// SPDX-License-Identifier: Apache-2.0
#include "svodrive/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "svodrive/error.hpp"
#include "svodrive/scenarios.hpp"

using nlohmann::json;

namespace svo::harness {

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 over root and counter
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Success:
      return "success";
    case Outcome::Crash:
      return "crash";
    case Outcome::Timeout:
      return "timeout";
  }
  return "unknown";
}

namespace {

Outcome outcome_from_string(const std::string& s) {
  for (auto o : {Outcome::Success, Outcome::Crash, Outcome::Timeout})
    if (s == to_string(o)) return o;
  throw FormatError("unknown outcome: " + s);
}

const char* status_name(sim::AgentStatus s) {
  switch (s) {
    case sim::AgentStatus::Active:
      return "active";
    case sim::AgentStatus::Success:
      return "success";
    case sim::AgentStatus::Crashed:
      return "crashed";
  }
  return "unknown";
}

sim::AgentStatus status_from_string(const std::string& s) {
  if (s == "active") return sim::AgentStatus::Active;
  if (s == "success") return sim::AgentStatus::Success;
  if (s == "crashed") return sim::AgentStatus::Crashed;
  throw FormatError("unknown agent status: " + s);
}

sim::FailureCause cause_from_string(const std::string& s) {
  auto c = sim::failure_from_string(s);
  if (!c) throw FormatError("unknown failure cause: " + s);
  return *c;
}

json state_json(const sim::VehicleState& v) {
  return json::array({v.position.x, v.position.y, v.heading, v.speed, v.length, v.width, v.agent_id, v.svo});
}

sim::VehicleState state_from(const json& j) {
  sim::VehicleState v;
  v.position = {j.at(0).get<double>(), j.at(1).get<double>()};
  v.heading = j.at(2).get<double>();
  v.speed = j.at(3).get<double>();
  v.length = j.at(4).get<double>();
  v.width = j.at(5).get<double>();
  v.agent_id = j.at(6).get<int>();
  v.svo = j.at(7).get<double>();
  return v;
}

constexpr const char* kComponents[] = {"speed", "collision", "off_zone", "off_path"};

json reward_json(const std::optional<reward::RewardBreakdown>& r) {
  if (!r) return nullptr;
  json c = json::array();
  for (const char* name : kComponents) {
    auto it = r->components.find(name);
    c.push_back(it == r->components.end() ? 0.0 : it->second);
  }
  return {{"ri", r->individual}, {"rs", r->social}, {"r", r->total}, {"c", c}};
}

std::optional<reward::RewardBreakdown> reward_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  reward::RewardBreakdown r;
  r.individual = j.at("ri").get<double>();
  r.social = j.at("rs").get<double>();
  r.total = j.at("r").get<double>();
  for (std::size_t i = 0; i < 4; ++i) r.components[kComponents[i]] = j.at("c").at(i).get<double>();
  return r;
}

}  // namespace

std::string to_lines(const EpisodeLog& log) {
  std::ostringstream os;
  json header = {{"type", "header"},   {"version", 1},       {"config_digest", log.config_digest},
                 {"episode", log.episode}, {"seed", log.seed}, {"scenario", log.scenario},
                 {"dt", log.dt},           {"horizon", log.horizon}};
  header["initial"] = json::array();
  for (const auto& v : log.initial) header["initial"].push_back(state_json(v));
  os << header.dump() << "\n";
  for (const auto& t : log.ticks) {
    json j = {{"type", "tick"}, {"tick", t.tick}};
    j["states"] = json::array();
    for (const auto& v : t.states) j["states"].push_back(state_json(v));
    j["status"] = json::array();
    for (auto s : t.status) j["status"].push_back(status_name(s));
    j["actions"] = json::array();
    for (const auto& a : t.actions) j["actions"].push_back({a[0], a[1]});
    j["rewards"] = json::array();
    for (const auto& r : t.rewards) j["rewards"].push_back(reward_json(r));
    j["recognition"] = json::array();
    for (const auto& r : t.recognition)
      j["recognition"].push_back({{"observer", r.observer},
                                  {"neighbors", r.neighbors},
                                  {"estimates", r.estimates},
                                  {"truths", r.truths}});
    j["failures"] = json::array();
    for (const auto& [k, c] : t.failures) j["failures"].push_back({k, sim::to_string(c)});
    j["successes"] = t.successes;
    os << j.dump() << "\n";
  }
  json summary = {{"type", "summary"}};
  summary["agents"] = json::array();
  for (const auto& a : log.agents) {
    summary["agents"].push_back({{"agent_id", a.agent_id},
                                 {"svo", a.svo},
                                 {"outcome", to_string(a.outcome)},
                                 {"cause", a.cause ? json(sim::to_string(*a.cause)) : json(nullptr)},
                                 {"tick", a.tick},
                                 {"return", a.episode_return}});
  }
  os << summary.dump() << "\n";
  return os.str();
}

EpisodeLog log_from_lines(const std::string& text) {
  EpisodeLog log;
  std::istringstream is(text);
  std::string line;
  bool header = false, summary = false;
  try {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("version").get<int>() != 1) throw FormatError("unsupported log version");
        log.config_digest = j.at("config_digest").get<std::string>();
        log.episode = j.at("episode").get<int>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.scenario = j.at("scenario").get<std::string>();
        log.dt = j.at("dt").get<double>();
        log.horizon = j.at("horizon").get<int>();
        for (const auto& v : j.at("initial")) log.initial.push_back(state_from(v));
        header = true;
      } else if (type == "tick") {
        TickRecord t;
        t.tick = j.at("tick").get<int>();
        for (const auto& v : j.at("states")) t.states.push_back(state_from(v));
        for (const auto& s : j.at("status")) t.status.push_back(status_from_string(s.get<std::string>()));
        for (const auto& a : j.at("actions")) t.actions.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        for (const auto& r : j.at("rewards")) t.rewards.push_back(reward_from(r));
        for (const auto& r : j.at("recognition")) {
          RecognitionRecord rec;
          rec.observer = r.at("observer").get<int>();
          rec.neighbors = r.at("neighbors").get<std::vector<int>>();
          rec.estimates = r.at("estimates").get<std::vector<double>>();
          rec.truths = r.at("truths").get<std::vector<double>>();
          t.recognition.push_back(std::move(rec));
        }
        for (const auto& f : j.at("failures"))
          t.failures.emplace_back(f.at(0).get<int>(), cause_from_string(f.at(1).get<std::string>()));
        t.successes = j.at("successes").get<std::vector<int>>();
        log.ticks.push_back(std::move(t));
      } else if (type == "summary") {
        for (const auto& a : j.at("agents")) {
          AgentSummary s;
          s.agent_id = a.at("agent_id").get<int>();
          s.svo = a.at("svo").get<double>();
          s.outcome = outcome_from_string(a.at("outcome").get<std::string>());
          if (!a.at("cause").is_null()) s.cause = cause_from_string(a.at("cause").get<std::string>());
          s.tick = a.at("tick").get<int>();
          s.episode_return = a.at("return").get<double>();
          log.agents.push_back(s);
        }
        summary = true;
      } else {
        throw FormatError("unknown log record type: " + type);
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed log record: ") + e.what());
  }
  if (!header || !summary) throw FormatError("log missing header or summary record");
  return log;
}

EpisodeContext make_context(const RunConfig& cfg) {
  EpisodeContext ctx;
  switch (cfg.policy) {
    case PolicyKind::Scripted:
      ctx.policy = std::make_shared<decision::ScriptedPolicy>(cfg.scripted);
      break;
    case PolicyKind::Random:
      ctx.policy = std::make_shared<decision::RandomPolicy>();
      break;
    case PolicyKind::Learned: {
      auto net = std::make_shared<decision::DecisionNet>(cfg.decision, 4);
      net->load(cfg.policy_checkpoint);
      ctx.policy = std::make_shared<decision::LearnedPolicy>(net, false);
      break;
    }
  }
  if (!cfg.recognition_checkpoint.empty()) {
    ctx.recognizer = std::make_shared<recog::RecognitionNet>(cfg.recognition);
    ctx.recognizer->load(cfg.recognition_checkpoint);
  }
  if (cfg.mode == SvoMode::Recog && !ctx.recognizer) throw ConfigError("mode recog requires a recognition checkpoint");
  return ctx;
}

EpisodeLog run_episode(const RunConfig& cfg, std::uint64_t seed, EpisodeContext& ctx, int episode_index,
                       const TickHook& hook) {
  if (!ctx.policy) throw ConfigError("episode context has no policy");
  if (cfg.mode == SvoMode::Recog && !ctx.recognizer) throw ConfigError("mode recog requires a recognizer");

  std::mt19937_64 spawn_rng(seed);
  auto network = scenario::build_network(cfg.scenario);
  auto agents = scenario::spawn_agents(network, cfg.scenario, spawn_rng);
  const obs::StaticMap map(network, cfg.observation.static_spacing);
  sim::World world(std::move(network), std::move(agents), cfg.sim, derive_seed(seed, 1));

  EpisodeLog log;
  log.config_digest = config_digest(cfg);
  log.episode = episode_index;
  log.seed = seed;
  log.scenario = scenario::to_string(cfg.scenario.kind);
  log.dt = cfg.sim.dt;
  log.horizon = cfg.sim.horizon;
  const std::size_t n = world.agents().size();
  std::unordered_map<int, std::size_t> by_id;
  for (std::size_t k = 0; k < n; ++k) {
    log.initial.push_back(world.agents()[k].state);
    by_id[world.agents()[k].state.agent_id] = k;
  }
  std::vector<double> returns(n, 0.0);

  std::vector<std::size_t> acting;
  std::vector<obs::Observation> observations;
  std::vector<decision::PolicyInput> inputs;
  std::vector<const obs::Observation*> ptrs;
  while (!world.all_done() && world.tick() < cfg.sim.horizon) {
    acting.clear();
    for (std::size_t k = 0; k < n; ++k)
      if (world.agents()[k].status == sim::AgentStatus::Active) acting.push_back(k);
    observations.clear();
    for (std::size_t k : acting) observations.push_back(obs::observe(world, k, cfg.observation, false, &map));

    TickRecord rec;
    std::vector<recog::RecognitionEstimate> estimates;
    if (ctx.recognizer) {
      ptrs.clear();
      for (const auto& o : observations) ptrs.push_back(&o);
      estimates = ctx.recognizer->recognize(ptrs);
      for (std::size_t a = 0; a < acting.size(); ++a) {
        if (observations[a].others.empty()) continue;
        RecognitionRecord r;
        r.observer = world.agents()[acting[a]].state.agent_id;
        for (const auto& e : observations[a].others) {
          r.neighbors.push_back(e.agent_id);
          r.truths.push_back(world.agents()[by_id.at(e.agent_id)].state.svo);
        }
        r.estimates = estimates[a];
        rec.recognition.push_back(std::move(r));
      }
    }

    inputs.clear();
    for (std::size_t a = 0; a < acting.size(); ++a) {
      decision::PolicyInput in;
      in.observation = &observations[a];
      in.self_svo = world.agents()[acting[a]].state.svo;
      for (std::size_t j = 0; j < observations[a].others.size(); ++j) {
        switch (cfg.mode) {
          case SvoMode::TrueSvo:
            in.neighbor_svos.push_back(world.agents()[by_id.at(observations[a].others[j].agent_id)].state.svo);
            break;
          case SvoMode::Recog:
            in.neighbor_svos.push_back(estimates[a][j]);
            break;
          case SvoMode::NoSvo:
            in.neighbor_svos.push_back(0.5);
            break;
        }
      }
      inputs.push_back(std::move(in));
    }
    if (hook) hook(TickView{&world, acting, observations, inputs});

    const auto outputs = ctx.policy->act(inputs, world.rng());
    std::vector<sim::Action> actions(n, sim::Action{0.0, 0.0});
    std::vector<bool> was_active(n, false);
    for (std::size_t a = 0; a < acting.size(); ++a) {
      actions[acting[a]] = outputs[a].action;
      was_active[acting[a]] = true;
    }
    const auto events = world.step(actions);
    std::unique_ptr<bool[]> flags(new bool[n]);
    for (std::size_t k = 0; k < n; ++k) flags[k] = was_active[k];
    const auto rewards =
        reward::transition_rewards(world, std::span<const bool>(flags.get(), n), events, cfg.reward, cfg.reward_radius);

    rec.tick = world.tick();
    rec.actions = std::move(actions);
    for (std::size_t k = 0; k < n; ++k) {
      rec.states.push_back(world.agents()[k].state);
      rec.status.push_back(world.agents()[k].status);
      if (was_active[k]) {
        rec.rewards.emplace_back(rewards[k]);
        returns[k] += rewards[k].total;
      } else {
        rec.rewards.emplace_back(std::nullopt);
      }
    }
    rec.failures = events.failures;
    rec.successes = events.successes;
    log.ticks.push_back(std::move(rec));
  }

  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = world.agents()[k];
    AgentSummary s;
    s.agent_id = a.state.agent_id;
    s.svo = a.state.svo;
    s.episode_return = returns[k];
    s.tick = a.done_tick;
    switch (a.status) {
      case sim::AgentStatus::Success:
        s.outcome = Outcome::Success;
        break;
      case sim::AgentStatus::Crashed:
        s.outcome = Outcome::Crash;
        s.cause = a.cause;
        break;
      case sim::AgentStatus::Active:
        s.outcome = Outcome::Timeout;
        s.tick = world.tick();
        break;
    }
    log.agents.push_back(s);
  }
  return log;
}

std::vector<EpisodeLog> run_episodes(const RunConfig& cfg, EpisodeContext& ctx) {
  std::vector<EpisodeLog> logs(static_cast<std::size_t>(cfg.episodes));
  const int threads = std::max(1, std::min(cfg.threads, cfg.episodes));
  if (threads == 1) {
    for (int e = 0; e < cfg.episodes; ++e)
      logs[static_cast<std::size_t>(e)] = run_episode(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(e)), ctx, e);
    return logs;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int e = next++; e < cfg.episodes; e = next++)
          logs[static_cast<std::size_t>(e)] =
              run_episode(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(e)), ctx, e);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return logs;
}

Stat summarize(std::span<const double> values) {
  Stat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(values.size() - 1)) / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

EpisodeMetrics episode_metrics(const EpisodeLog& log) {
  EpisodeMetrics m;
  m.agents = static_cast<int>(log.agents.size());
  if (m.agents == 0) return m;
  int success = 0, crash = 0, timeout = 0, collision = 0, off_zone = 0, off_path = 0;
  double ret = 0.0;
  for (const auto& a : log.agents) {
    ret += a.episode_return;
    switch (a.outcome) {
      case Outcome::Success:
        ++success;
        break;
      case Outcome::Timeout:
        ++timeout;
        break;
      case Outcome::Crash:
        ++crash;
        if (a.cause == sim::FailureCause::Collision) ++collision;
        if (a.cause == sim::FailureCause::OffZone) ++off_zone;
        if (a.cause == sim::FailureCause::OffPath) ++off_path;
        break;
    }
  }
  const double n = m.agents;
  m.success_rate = 100.0 * success / n;
  m.crash_rate = 100.0 * crash / n;
  m.timeout_rate = 100.0 * timeout / n;
  m.collision_rate = 100.0 * collision / n;
  m.off_zone_rate = 100.0 * off_zone / n;
  m.off_path_rate = 100.0 * off_path / n;
  m.mean_return = ret / n;

  double speed = 0.0;
  long alive = 0;
  double dev = 0.0;
  int pairs = 0;
  for (const auto& t : log.ticks) {
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      if (!t.rewards[k]) continue;
      speed += t.states[k].speed / sim::kMaxSpeed;
      ++alive;
    }
    for (const auto& r : t.recognition)
      for (std::size_t j = 0; j < r.estimates.size(); ++j) {
        dev += std::abs(r.estimates[j] - r.truths[j]);
        ++pairs;
      }
  }
  m.speed_score = alive > 0 ? 100.0 * speed / static_cast<double>(alive) : 0.0;
  if (pairs > 0) m.mean_deviation = dev / pairs;
  m.recognition_pairs = pairs;
  return m;
}

Metrics aggregate(std::span<const EpisodeLog> logs, const std::string& label) {
  Metrics m;
  m.label = label;
  m.episodes = static_cast<int>(logs.size());
  std::vector<double> success, crash, timeout, collision, off_zone, off_path, speed, ret, dev;
  std::vector<double> tick_sum, tick_count;
  for (const auto& log : logs) {
    const auto e = episode_metrics(log);
    success.push_back(e.success_rate);
    crash.push_back(e.crash_rate);
    timeout.push_back(e.timeout_rate);
    collision.push_back(e.collision_rate);
    off_zone.push_back(e.off_zone_rate);
    off_path.push_back(e.off_path_rate);
    speed.push_back(e.speed_score);
    ret.push_back(e.mean_return);
    if (e.mean_deviation) dev.push_back(*e.mean_deviation);
    for (std::size_t t = 0; t < log.ticks.size(); ++t) {
      if (tick_sum.size() <= t) {
        tick_sum.resize(t + 1, 0.0);
        tick_count.resize(t + 1, 0.0);
      }
      for (const auto& r : log.ticks[t].recognition)
        for (std::size_t j = 0; j < r.estimates.size(); ++j) {
          tick_sum[t] += std::abs(r.estimates[j] - r.truths[j]);
          tick_count[t] += 1.0;
        }
    }
  }
  m.success_rate = summarize(success);
  m.crash_rate = summarize(crash);
  m.timeout_rate = summarize(timeout);
  m.collision_rate = summarize(collision);
  m.off_zone_rate = summarize(off_zone);
  m.off_path_rate = summarize(off_path);
  m.speed_score = summarize(speed);
  m.mean_return = summarize(ret);
  m.mean_deviation = summarize(dev);
  bool any = false;
  for (std::size_t t = 0; t < tick_sum.size(); ++t) {
    any = any || tick_count[t] > 0.0;
    m.deviation_by_tick.push_back(tick_count[t] > 0.0 ? tick_sum[t] / tick_count[t]
                                                       : std::numeric_limits<double>::quiet_NaN());
  }
  if (!any) m.deviation_by_tick.clear();
  return m;
}

Metrics evaluate(const RunConfig& cfg, EpisodeContext& ctx, std::vector<EpisodeLog>* logs) {
  auto all = run_episodes(cfg, ctx);
  Metrics m = aggregate(all, std::string(scenario::to_string(cfg.scenario.kind)));
  if (logs != nullptr) *logs = std::move(all);
  return m;
}

}  // namespace svo::harness
