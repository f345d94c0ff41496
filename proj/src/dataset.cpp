// SPDX-License-Identifier: Apache-2.0
#include "svodrive/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "svodrive/error.hpp"
#include "svodrive/scenarios.hpp"

using nlohmann::json;

namespace svo::recog {

namespace {

std::vector<RecognitionSample> episode_samples(const RunConfig& cfg, harness::EpisodeContext& ctx,
                                               std::uint64_t seed, int episode) {
  std::vector<RecognitionSample> out;
  auto hook = [&](const harness::TickView& view) {
    const int tick = view.world->tick();
    if (tick < cfg.dataset.min_tick || tick % cfg.dataset.tick_stride != 0) return;
    std::vector<std::size_t> chosen;
    for (std::size_t a = 0; a < view.agents.size(); ++a)
      if (!view.observations[a].others.empty()) chosen.push_back(a);
    const auto cap = static_cast<std::size_t>(cfg.dataset.max_observers_per_tick);
    if (cap > 0 && chosen.size() > cap) {
      std::mt19937_64 pick(harness::derive_seed(seed, 1000 + static_cast<std::uint64_t>(tick)));
      std::shuffle(chosen.begin(), chosen.end(), pick);
      chosen.resize(cap);
      std::sort(chosen.begin(), chosen.end());
    }
    const auto& agents = view.world->agents();
    for (std::size_t a : chosen) {
      RecognitionSample s;
      s.observation = view.observations[a];
      s.episode = episode;
      s.tick = tick;
      for (const auto& e : s.observation.others) {
        s.neighbor_ids.push_back(e.agent_id);
        const auto it = std::find_if(agents.begin(), agents.end(),
                                     [&](const sim::Agent& g) { return g.state.agent_id == e.agent_id; });
        s.targets.push_back(it->state.svo);
      }
      out.push_back(std::move(s));
    }
  };
  RunConfig local = cfg;
  local.mode = SvoMode::TrueSvo;
  harness::EpisodeContext no_recog{ctx.policy, nullptr};
  harness::run_episode(local, seed, no_recog, episode, hook);
  return out;
}

json vehicle_json(const obs::PolylineElement& e) {
  json pts = json::array();
  for (const auto& p : e.points) pts.push_back({p.pose.x, p.pose.y, p.pose.heading, p.speed});
  return {{"id", e.agent_id}, {"p", pts}};
}

obs::PolylineElement vehicle_from(const json& j, int index) {
  obs::PolylineElement e;
  e.kind = obs::ElementKind::Vehicle;
  e.agent_id = j.at("id").get<int>();
  int k = 0;
  for (const auto& p : j.at("p")) {
    obs::PointFeature f;
    f.pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    f.speed = p.at(3).get<double>();
    f.element_index = index;
    f.point_index = k++;
    e.points.push_back(f);
  }
  return e;
}

char kind_code(obs::ElementKind k) {
  switch (k) {
    case obs::ElementKind::Centerline:
      return 'c';
    case obs::ElementKind::Sideline:
      return 's';
    case obs::ElementKind::Route:
      return 'r';
    case obs::ElementKind::Vehicle:
      return 'v';
  }
  return '?';
}

obs::ElementKind kind_from(const std::string& s) {
  if (s == "c") return obs::ElementKind::Centerline;
  if (s == "s") return obs::ElementKind::Sideline;
  if (s == "r") return obs::ElementKind::Route;
  throw FormatError("unknown static element kind: " + s);
}

}  // namespace

Dataset generate_dataset(const RunConfig& cfg, harness::EpisodeContext& ctx, int episodes, std::uint64_t seed,
                         int first_episode) {
  Dataset d;
  d.header.scenario = scenario::to_string(cfg.scenario.kind);
  d.header.config_digest = config_digest(cfg);
  d.header.seed = seed;
  d.header.episodes = std::max(episodes, 0);
  if (episodes <= 0) return d;
  std::vector<std::vector<RecognitionSample>> parts(static_cast<std::size_t>(episodes));
  auto run = [&](int e) {
    parts[static_cast<std::size_t>(e)] =
        episode_samples(cfg, ctx, harness::derive_seed(seed, static_cast<std::uint64_t>(e)), first_episode + e);
  };
  const int threads = std::max(1, std::min(cfg.threads, episodes));
  if (threads == 1) {
    for (int e = 0; e < episodes; ++e) run(e);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (int e = next++; e < episodes; e = next++) run(e);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  for (auto& p : parts)
    for (auto& s : p) d.samples.push_back(std::move(s));
  return d;
}

std::string sample_to_line(const RecognitionSample& s) {
  json j;
  j["e"] = s.episode;
  j["t"] = s.tick;
  j["ids"] = s.neighbor_ids;
  j["y"] = s.targets;
  j["ego"] = vehicle_json(s.observation.ego);
  j["others"] = json::array();
  for (const auto& e : s.observation.others) j["others"].push_back(vehicle_json(e));
  j["static"] = json::array();
  for (const auto& e : s.observation.static_elements) {
    json pts = json::array();
    for (const auto& p : e.points) pts.push_back({p.pose.x, p.pose.y, p.pose.heading});
    const double w = e.points.empty() || !e.points.front().aux ? 0.0 : *e.points.front().aux;
    j["static"].push_back({{"k", std::string(1, kind_code(e.kind))}, {"w", w}, {"p", pts}});
  }
  return j.dump();
}

RecognitionSample sample_from_line(const std::string& line) {
  RecognitionSample s;
  try {
    const json j = json::parse(line);
    s.episode = j.at("e").get<int>();
    s.tick = j.at("t").get<int>();
    s.neighbor_ids = j.at("ids").get<std::vector<int>>();
    s.targets = j.at("y").get<std::vector<double>>();
    s.observation.ego = vehicle_from(j.at("ego"), 0);
    int index = 1;
    for (const auto& e : j.at("others")) s.observation.others.push_back(vehicle_from(e, index++));
    index = 0;
    for (const auto& e : j.at("static")) {
      obs::PolylineElement el;
      el.kind = kind_from(e.at("k").get<std::string>());
      const double w = e.at("w").get<double>();
      int k = 0;
      for (const auto& p : e.at("p")) {
        obs::PointFeature f;
        f.pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
        f.aux = w;
        f.element_index = index;
        f.point_index = k++;
        el.points.push_back(f);
      }
      s.observation.static_elements.push_back(std::move(el));
      ++index;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset record: ") + e.what());
  }
  if (s.targets.size() != s.observation.others.size() || s.neighbor_ids.size() != s.targets.size())
    throw FormatError("dataset record targets do not align with neighbours");
  return s;
}

std::filesystem::path index_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".idx";
  return p;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  std::ofstream idx(index_path(path), std::ios::binary);
  if (!idx) throw IoError("cannot write dataset index: " + index_path(path).string());
  const json header = {{"format", "svodrive-recognition"}, {"version", d.header.version},
                       {"scenario", d.header.scenario},     {"config_digest", d.header.config_digest},
                       {"seed", d.header.seed},             {"episodes", d.header.episodes},
                       {"samples", d.samples.size()}};
  out << header.dump() << "\n";
  idx << "svodrive-index 1 " << d.samples.size() << "\n";
  for (const auto& s : d.samples) {
    idx << static_cast<std::uint64_t>(out.tellp()) << "\n";
    out << sample_to_line(s) << "\n";
  }
  if (!out || !idx) throw IoError("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset: " + path.string());
  Dataset d;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty dataset file: " + path.string());
  std::size_t expected = 0;
  try {
    const json h = json::parse(line);
    if (h.at("format").get<std::string>() != "svodrive-recognition") throw FormatError("not a recognition dataset");
    d.header.version = h.at("version").get<int>();
    if (d.header.version != 1) throw FormatError("unsupported dataset version");
    d.header.scenario = h.at("scenario").get<std::string>();
    d.header.config_digest = h.at("config_digest").get<std::string>();
    d.header.seed = h.at("seed").get<std::uint64_t>();
    d.header.episodes = h.at("episodes").get<int>();
    expected = h.at("samples").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  while (std::getline(in, line))
    if (!line.empty()) d.samples.push_back(sample_from_line(line));
  if (d.samples.size() != expected) throw FormatError("dataset truncated: " + path.string());
  return d;
}

RecognitionSample read_sample(const std::filesystem::path& path, std::size_t i) {
  std::ifstream idx(index_path(path));
  if (!idx) throw IoError("cannot read dataset index: " + index_path(path).string());
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  idx >> magic >> version >> count;
  if (magic != "svodrive-index" || version != 1) throw FormatError("bad dataset index: " + index_path(path).string());
  if (i >= count) throw StructuralError("sample index out of range");
  std::uint64_t offset = 0;
  for (std::size_t k = 0; k <= i; ++k)
    if (!(idx >> offset)) throw FormatError("dataset index truncated");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset: " + path.string());
  in.seekg(static_cast<std::streamoff>(offset));
  std::string line;
  std::getline(in, line);
  return sample_from_line(line);
}

Split split_by_episode(const std::vector<RecognitionSample>& samples, double holdout_fraction, std::uint64_t seed) {
  std::vector<int> episodes;
  for (const auto& s : samples) episodes.push_back(s.episode);
  std::sort(episodes.begin(), episodes.end());
  episodes.erase(std::unique(episodes.begin(), episodes.end()), episodes.end());
  std::mt19937_64 rng(seed);
  std::shuffle(episodes.begin(), episodes.end(), rng);
  std::size_t n_hold = static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(episodes.size())));
  if (episodes.size() >= 2) n_hold = std::clamp<std::size_t>(n_hold, 1, episodes.size() - 1);
  else n_hold = 0;
  std::vector<int> hold(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::sort(hold.begin(), hold.end());
  Split split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::binary_search(hold.begin(), hold.end(), samples[i].episode)) split.holdout.push_back(i);
    else split.train.push_back(i);
  }
  return split;
}

namespace {

std::vector<double> stacked_targets(const std::vector<RecognitionSample>& samples, std::span<const std::size_t> idx) {
  std::vector<double> t;
  for (std::size_t i : idx) t.insert(t.end(), samples[i].targets.begin(), samples[i].targets.end());
  return t;
}

std::vector<const obs::Observation*> batch_obs(const std::vector<RecognitionSample>& samples,
                                               std::span<const std::size_t> idx) {
  std::vector<const obs::Observation*> b;
  for (std::size_t i : idx) b.push_back(&samples[i].observation);
  return b;
}

}  // namespace

RecognitionEval evaluate_recognition(RecognitionNet& net, const std::vector<RecognitionSample>& samples,
                                     std::span<const std::size_t> subset, int batch_size) {
  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(samples.size());
    std::iota(all.begin(), all.end(), 0);
    subset = all;
  }
  RecognitionEval ev;
  std::map<int, std::pair<double, int>> per_episode;
  std::vector<double> tick_sum, tick_count;
  double se = 0.0, ae = 0.0, base = 0.0;
  std::vector<std::size_t> chunk;
  for (std::size_t start = 0; start < subset.size(); start += static_cast<std::size_t>(batch_size)) {
    chunk.assign(subset.begin() + static_cast<std::ptrdiff_t>(start),
                 subset.begin() + static_cast<std::ptrdiff_t>(std::min(subset.size(), start + static_cast<std::size_t>(batch_size))));
    const auto est = net.recognize(batch_obs(samples, chunk));
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const auto& s = samples[chunk[b]];
      auto& ep = per_episode[s.episode];
      const auto t = static_cast<std::size_t>(std::max(s.tick, 0));
      if (tick_sum.size() <= t) {
        tick_sum.resize(t + 1, 0.0);
        tick_count.resize(t + 1, 0.0);
      }
      for (std::size_t j = 0; j < s.targets.size(); ++j) {
        const double d = est[b][j] - s.targets[j];
        se += d * d;
        ae += std::abs(d);
        base += std::abs(s.targets[j] - 0.5);
        ep.first += std::abs(d);
        ep.second += 1;
        tick_sum[t] += std::abs(d);
        tick_count[t] += 1.0;
        ++ev.pairs;
      }
    }
  }
  if (ev.pairs > 0) {
    ev.mse = se / ev.pairs;
    ev.mde = ae / ev.pairs;
    ev.mean_predictor_mde = base / ev.pairs;
  }
  std::vector<double> eps;
  for (const auto& [e, v] : per_episode)
    if (v.second > 0) eps.push_back(v.first / v.second);
  ev.episode_mde = harness::summarize(eps);
  for (std::size_t t = 0; t < tick_sum.size(); ++t)
    ev.mde_by_tick.push_back(tick_count[t] > 0.0 ? tick_sum[t] / tick_count[t]
                                                 : std::numeric_limits<double>::quiet_NaN());
  return ev;
}

TrainResult train_recognition(const std::vector<RecognitionSample>& samples, const RecognitionConfig& model,
                              const RecognitionTrainConfig& train, std::uint64_t seed, const EpochCallback& on_epoch) {
  if (samples.empty()) throw TrainingError("recognition dataset is empty");
  TrainResult result;
  result.split = split_by_episode(samples, train.holdout_fraction, seed);
  if (result.split.train.empty()) throw TrainingError("no training samples after the episode split");
  // A single-episode dataset has no held-out part; the training set stands in for it.
  const std::vector<std::size_t>& holdout = result.split.holdout.empty() ? result.split.train : result.split.holdout;

  RecognitionConfig cfg = model;
  cfg.seed = model.seed != 0 ? model.seed : seed;
  result.net = std::make_unique<RecognitionNet>(cfg);
  RecognitionNet& net = *result.net;
  nn::Adam adam({train.learning_rate, 0.9, 0.999, 1e-8, train.grad_clip});
  std::mt19937_64 rng(harness::derive_seed(seed, 77));

  std::vector<std::uint8_t> best = net.params().serialize();
  result.best_holdout_loss = evaluate_recognition(net, samples, holdout).mse;
  result.best_epoch = 0;

  std::vector<std::size_t> order = result.split.train;
  int since_best = 0;
  for (int epoch = 1; epoch <= train.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int loss_pairs = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      std::vector<std::size_t> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(train.batch_size)); ++i)
        if (!samples[order[i]].targets.empty()) batch.push_back(order[i]);
      if (batch.empty()) continue;
      const auto targets = stacked_targets(samples, batch);
      nn::Tape tape;
      nn::Var est = net.forward(tape, batch_obs(samples, batch));
      nn::Var loss = recognition_loss(est, targets);
      const double l = loss.value()(0, 0);
      if (!std::isfinite(l))
        throw TrainingError("non-finite recognition loss at epoch " + std::to_string(epoch) + ", batch offset " +
                            std::to_string(start));
      nn::backward(tape, loss, net.params());
      adam.update(net.params());
      if (!net.params().all_finite())
        throw TrainingError("non-finite parameters after update at epoch " + std::to_string(epoch));
      loss_sum += l * static_cast<double>(targets.size());
      loss_pairs += static_cast<int>(targets.size());
    }
    const auto ev = evaluate_recognition(net, samples, holdout);
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_pairs > 0 ? loss_sum / loss_pairs : 0.0;
    st.holdout_loss = ev.mse;
    st.holdout_mde = ev.mde;
    if (!std::isfinite(ev.mse)) throw TrainingError("non-finite held-out loss at epoch " + std::to_string(epoch));
    if (ev.mse < result.best_holdout_loss) {
      result.best_holdout_loss = ev.mse;
      result.best_epoch = epoch;
      best = net.params().serialize();
      st.checkpoint = true;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
    if (since_best >= train.patience) break;
  }
  net.params().load_values(nn::ParamStore::deserialize(best));
  return result;
}

}  // namespace svo::recog
