// SPDX-License-Identifier: Apache-2.0
#include "svodrive/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "svodrive/config.hpp"
#include "svodrive/dataset.hpp"
#include "svodrive/error.hpp"
#include "svodrive/export.hpp"
#include "svodrive/harness.hpp"
#include "svodrive/sac.hpp"

namespace svo::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : Error {
  using Error::Error;
  const char* category() const noexcept override { return "usage"; }
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config,-c", c.config, "Config file (JSON)")->required();
  sub->add_option("--seed,-s", c.seed, "Root seed, overrides the config");
  sub->add_option("--episodes,-n", c.episodes, "Episode count, overrides the config");
  sub->add_option("--threads,-j", c.threads, "Worker threads, overrides the config");
}

RunConfig load(const Common& c) {
  if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
  RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  validate(cfg);
  return cfg;
}

std::string pct(const harness::Stat& s) {
  std::ostringstream os;
  os.precision(4);
  os << s.mean;
  return os.str();
}

fs::path dataset_file(const RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!cfg.dataset_path.empty()) return cfg.dataset_path;
  return output_directory(cfg) / "dataset.jsonl";
}

io::MetricsRow row_for(const RunConfig& cfg, const harness::Metrics& m, const std::string& label) {
  io::MetricsRow r;
  r.label = label;
  r.scenario = scenario::to_string(cfg.scenario.kind);
  r.mode = to_string(cfg.mode);
  r.metrics = m;
  return r;
}

void write_curve(const fs::path& dir, const std::string& scenario, const std::vector<double>& curve) {
  if (curve.empty()) return;
  io::write_text(dir / ("mde_by_tick_" + scenario + ".csv"), io::curve_table("tick", "mde", curve));
  io::Series s{"mean deviation", {}, curve, {}};
  for (std::size_t t = 0; t < curve.size(); ++t) s.x.push_back(static_cast<double>(t));
  io::write_text(dir / ("mde_by_tick_" + scenario + ".svg"),
                 io::svg_line_plot("Recognition error per tick (" + scenario + ")", "tick", "mean deviation error",
                                   std::span(&s, 1)));
}

int cmd_simulate(const Common& c, std::ostream& out, bool evaluate) {
  RunConfig cfg = load(c);
  if (c.episodes) cfg.episodes = *c.episodes;
  validate(cfg);
  auto ctx = harness::make_context(cfg);
  std::vector<harness::EpisodeLog> logs;
  const auto m = harness::evaluate(cfg, ctx, &logs);
  const fs::path dir = output_directory(cfg);
  const std::string name = evaluate ? "evaluate" : "simulate";
  if (cfg.write_logs) io::write_logs(dir / (name + "_logs"), logs);
  const auto row = row_for(cfg, m, name);
  io::write_text(dir / (name + "_metrics.csv"), io::metrics_table(std::span(&row, 1)));
  if (evaluate) write_curve(dir, row.scenario, m.deviation_by_tick);
  out << name << " episodes=" << m.episodes << " success=" << pct(m.success_rate) << " crash=" << pct(m.crash_rate)
      << " timeout=" << pct(m.timeout_rate) << " speed=" << pct(m.speed_score);
  if (m.mean_deviation.count > 0) out << " mde=" << pct(m.mean_deviation);
  out << " out=" << dir.string() << "\n";
  return kExitOk;
}

int cmd_gen_data(const Common& c, const std::string& path, std::ostream& out) {
  RunConfig cfg = load(c);
  const int episodes = c.episodes ? *c.episodes : cfg.dataset.episodes;
  auto ctx = harness::make_context(cfg);
  const auto d = recog::generate_dataset(cfg, ctx, episodes, cfg.seed);
  const fs::path file = dataset_file(cfg, path);
  recog::write_dataset(d, file);
  out << "gen-data episodes=" << episodes << " samples=" << d.samples.size() << " out=" << file.string() << "\n";
  return kExitOk;
}

std::string history_table(const std::vector<recog::EpochStats>& h) {
  std::ostringstream os;
  os << "epoch,train_loss,holdout_loss,holdout_mde,checkpoint\n";
  for (const auto& e : h)
    os << e.epoch << "," << io::format_number(e.train_loss) << "," << io::format_number(e.holdout_loss) << ","
       << io::format_number(e.holdout_mde) << "," << (e.checkpoint ? 1 : 0) << "\n";
  return os.str();
}

int cmd_train_recog(const Common& c, const std::string& path, std::ostream& out) {
  RunConfig cfg = load(c);
  if (c.episodes) cfg.recognition_training.max_epochs = *c.episodes;
  const auto data = recog::read_dataset(dataset_file(cfg, path));
  auto result = recog::train_recognition(data.samples, cfg.recognition, cfg.recognition_training, cfg.seed);
  const fs::path dir = output_directory(cfg);
  const std::string variant = recog::to_string(cfg.recognition.variant);
  const fs::path ckpt = dir / ("recognition_" + variant + ".ckpt");
  fs::create_directories(dir);
  result.net->save(ckpt.string());
  io::write_text(dir / ("recognition_" + variant + "_history.csv"), history_table(result.history));
  const auto ev = recog::evaluate_recognition(*result.net, data.samples,
                                              result.split.holdout.empty() ? result.split.train : result.split.holdout);
  out << "train-recog variant=" << variant << " epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
      << " holdout_mse=" << ev.mse << " holdout_mde=" << ev.mde << " baseline_mde=" << ev.mean_predictor_mde
      << " checkpoint=" << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_train_sac(const Common& c, std::ostream& out) {
  RunConfig cfg = load(c);
  if (c.episodes) cfg.sac.episodes_eval = *c.episodes;
  const auto result = sac::sac_train(cfg, cfg.seed);
  const fs::path dir = output_directory(cfg);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "policy.ckpt";
  result.policy->save(ckpt.string());
  io::write_text(dir / "sac_returns.csv", io::curve_table("episode", "mean_return", result.episode_returns));

  RunConfig eval = cfg;
  eval.mode = SvoMode::TrueSvo;
  harness::EpisodeContext trained{std::make_shared<decision::LearnedPolicy>(result.policy, false), nullptr};
  harness::EpisodeContext random{std::make_shared<decision::RandomPolicy>(), nullptr};
  const auto eval_seed = harness::derive_seed(cfg.seed, 999);
  const auto rt = sac::episode_returns(eval, trained, cfg.sac.episodes_eval, eval_seed);
  const auto rr = sac::episode_returns(eval, random, cfg.sac.episodes_eval, eval_seed);
  const auto st = harness::summarize(rt), sr = harness::summarize(rr);
  std::ostringstream table;
  table << "policy,mean_return,stderr,episodes\n"
        << "trained," << io::format_number(st.mean) << "," << io::format_number(st.stderr_) << "," << st.count << "\n"
        << "random," << io::format_number(sr.mean) << "," << io::format_number(sr.stderr_) << "," << sr.count << "\n";
  io::write_text(dir / "sac_eval.csv", table.str());
  out << "train-sac transitions=" << result.transitions << " updates=" << result.updates.size()
      << " trained_return=" << st.mean << " random_return=" << sr.mean << " checkpoint=" << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, std::ostream& out) {
  RunConfig cfg = load(c);
  if (c.episodes) cfg.episodes = *c.episodes;
  auto ctx = harness::make_context(cfg);
  std::vector<io::MetricsRow> rows;
  io::Series success{"success", {}, {}, {}}, crash{"crash", {}, {}, {}};
  for (double v : cfg.sweep.svo_values) {
    RunConfig run = cfg;
    run.scenario.svo.type = scenario::SvoDistribution::Type::Fixed;
    run.scenario.svo.value = v;
    const auto m = harness::evaluate(run, ctx);
    auto row = row_for(run, m, "sweep");
    row.svo = v;
    rows.push_back(row);
    success.x.push_back(v);
    success.y.push_back(m.success_rate.mean);
    success.err.push_back(m.success_rate.stderr_);
    crash.x.push_back(v);
    crash.y.push_back(m.crash_rate.mean);
    crash.err.push_back(m.crash_rate.stderr_);
    out << "sweep-svo svo=" << v << " success=" << pct(m.success_rate) << " crash=" << pct(m.crash_rate)
        << " speed=" << pct(m.speed_score) << "\n";
  }
  const fs::path dir = output_directory(cfg);
  const std::string sc = scenario::to_string(cfg.scenario.kind);
  io::write_text(dir / ("sweep_" + sc + ".csv"), io::metrics_table(rows));
  const io::Series both[] = {success, crash};
  io::write_text(dir / ("sweep_" + sc + ".svg"),
                 io::svg_line_plot("Outcome vs fixed SVO (" + sc + ")", "SVO", "rate (%)", both));
  return kExitOk;
}

int cmd_ablate(const Common& c, const std::string& path, std::ostream& out) {
  RunConfig cfg = load(c);
  const auto data = recog::read_dataset(dataset_file(cfg, path));
  std::ostringstream table;
  table << "variant,holdout_mde,holdout_mde_se,holdout_mse,pairs,episodes,best_epoch\n";
  io::Series s{"held-out mean deviation", {}, {}, {}};
  double x = 0.0;
  for (auto v : {recog::Variant::Full, recog::Variant::WithoutMap, recog::Variant::WithoutAttention}) {
    auto model = cfg.recognition;
    model.variant = v;
    auto result = recog::train_recognition(data.samples, model, cfg.recognition_training, cfg.seed);
    const auto& hold = result.split.holdout.empty() ? result.split.train : result.split.holdout;
    const auto ev = recog::evaluate_recognition(*result.net, data.samples, hold);
    table << recog::to_string(v) << "," << io::format_number(ev.episode_mde.mean) << ","
          << io::format_number(ev.episode_mde.stderr_) << "," << io::format_number(ev.mse) << "," << ev.pairs << ","
          << ev.episode_mde.count << "," << result.best_epoch << "\n";
    s.x.push_back(x);
    x += 1.0;
    s.y.push_back(ev.episode_mde.mean);
    s.err.push_back(ev.episode_mde.stderr_);
    out << "ablate variant=" << recog::to_string(v) << " holdout_mde=" << ev.episode_mde.mean
        << " stderr=" << ev.episode_mde.stderr_ << "\n";
  }
  const fs::path dir = output_directory(cfg);
  io::write_text(dir / "ablation.csv", table.str());
  io::write_text(dir / "ablation.svg",
                 io::svg_line_plot("Recognition ablation (0 full, 1 wo_map, 2 wo_attention)", "variant",
                                   "held-out mean deviation", std::span(&s, 1)));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent driving simulator with SVO recognition", "svodrive"};
  app.require_subcommand(1);
  std::string print_config;
  Common simulate, gen, train_recog, train_sac, evaluate, sweep, ablate;
  std::string gen_out, recog_data, ablate_data;

  auto* s_sim = app.add_subcommand("simulate", "Run episodes and write logs and metrics");
  add_common(s_sim, simulate);
  auto* s_gen = app.add_subcommand("gen-data", "Generate a recognition dataset");
  add_common(s_gen, gen);
  s_gen->add_option("--out,-o", gen_out, "Dataset file");
  auto* s_rec = app.add_subcommand("train-recog", "Train the recognition network");
  add_common(s_rec, train_recog);
  s_rec->add_option("--data,-d", recog_data, "Dataset file");
  auto* s_sac = app.add_subcommand("train-sac", "Train the shared decision policy with SAC");
  add_common(s_sac, train_sac);
  auto* s_eval = app.add_subcommand("evaluate", "Evaluate a policy and report metrics");
  add_common(s_eval, evaluate);
  auto* s_sweep = app.add_subcommand("sweep-svo", "Evaluate over a grid of fixed all-agent SVOs");
  add_common(s_sweep, sweep);
  auto* s_abl = app.add_subcommand("ablate", "Train and compare recognition variants");
  add_common(s_abl, ablate);
  s_abl->add_option("--data,-d", ablate_data, "Dataset file");
  auto* s_cfg = app.add_subcommand("default-config", "Print the reference config with every default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error kind=usage message=" << quote(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(simulate, out, false);
    if (s_eval->parsed()) return cmd_simulate(evaluate, out, true);
    if (s_gen->parsed()) return cmd_gen_data(gen, gen_out, out);
    if (s_rec->parsed()) return cmd_train_recog(train_recog, recog_data, out);
    if (s_sac->parsed()) return cmd_train_sac(train_sac, out);
    if (s_sweep->parsed()) return cmd_sweep(sweep, out);
    if (s_abl->parsed()) return cmd_ablate(ablate, ablate_data, out);
    if (s_cfg->parsed()) {
      out << config_to_json(RunConfig{}) << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error kind=usage message=" << quote(e.what()) << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error kind=config message=" << quote(e.what()) << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error kind=" << e.category() << " message=" << quote(e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error kind=internal message=" << quote(e.what()) << "\n";
    return kExitFailure;
  }
  err << "error kind=usage message=\"no subcommand\"\n";
  return kExitUsage;
}

}  // namespace svo::cli
