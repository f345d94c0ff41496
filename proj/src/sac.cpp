// SPDX-License-Identifier: Apache-2.0
#include "svodrive/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svodrive/error.hpp"

namespace svo::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (items_.empty()) throw StructuralError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

CriticNet::CriticNet(const decision::DecisionConfig& cfg, const std::vector<int>& hidden, std::uint64_t seed)
    : params_(seed) {
  trunk_ = decision::DecisionTrunk(params_, "critic", cfg);
  std::vector<int> widths{cfg.d_model() + 2};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  head_ = nn::Mlp(params_, "critic.head", widths);
}

nn::Var CriticNet::forward(nn::Tape& tape, nn::ParamStore& store, std::span<const decision::PolicyInput* const> batch,
                           nn::Var actions) const {
  const nn::Var parts[] = {trunk_.encode(tape, store, batch), actions};
  return head_.forward(tape, store, nn::concat_cols(parts));
}

SquashedSample squashed_sample(nn::Var raw, const nn::Matrix& noise) {
  nn::Tape& tape = *raw.tape();
  nn::Var mean = nn::slice_cols(raw, 0, 2);
  nn::Var log_std = nn::clamp(nn::slice_cols(raw, 2, 2), decision::kLogStdMin, decision::kLogStdMax);
  nn::Var u = nn::add(mean, nn::mul(nn::exp(log_std), tape.constant(noise)));
  nn::Var a = nn::tanh(u);
  const nn::Matrix base =
      (-0.5 * noise.array().square() - 0.5 * std::log(2.0 * std::numbers::pi)).matrix();
  nn::Var jac = nn::log(nn::add_scalar(nn::scale(nn::square(a), -1.0), 1.0 + 1e-6));
  nn::Var per_dim = nn::sub(nn::sub(tape.constant(base), log_std), jac);
  return {a, nn::sum_cols(per_dim)};
}

SacLearner::SacLearner(const decision::DecisionConfig& policy, const SacConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      actor_(std::make_shared<decision::DecisionNet>(
          [&] {
            auto p = policy;
            if (p.seed == 0) p.seed = seed;
            return p;
          }(),
          4)),
      q1_(policy, cfg.critic_hidden, seed + 101),
      q2_(policy, cfg.critic_hidden, seed + 202),
      q1_target_(q1_.params()),
      q2_target_(q2_.params()),
      log_alpha_(seed),
      actor_opt_({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0}),
      q1_opt_({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0}),
      q2_opt_({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0}),
      alpha_opt_({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0}) {
  auto& la = log_alpha_.create_zero("log_alpha", 1, 1);
  la.value(0, 0) = std::log(cfg.initial_alpha);
}

double SacLearner::alpha() const { return std::exp(log_alpha_.at("log_alpha").value(0, 0)); }

namespace {

std::vector<decision::PolicyInput> inputs_of(std::span<const Transition* const> batch, bool next) {
  std::vector<decision::PolicyInput> in;
  in.reserve(batch.size());
  for (const auto* t : batch) in.push_back(next ? t->next_input() : t->input());
  return in;
}

std::vector<const decision::PolicyInput*> pointers(const std::vector<decision::PolicyInput>& in) {
  std::vector<const decision::PolicyInput*> p;
  for (const auto& x : in) p.push_back(&x);
  return p;
}

nn::Matrix gaussian(std::size_t rows, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Matrix m(static_cast<Eigen::Index>(rows), 2);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

nn::Var SacLearner::critic_loss(nn::Tape& tape, std::span<const Transition* const> batch, const nn::Matrix& next_noise) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto cur = inputs_of(batch, false);
  const auto nxt = inputs_of(batch, true);
  const auto cur_p = pointers(cur);
  const auto nxt_p = pointers(nxt);

  nn::Matrix y(B, 1);
  {
    nn::Tape t;
    const auto s = squashed_sample(actor_->forward(t, nxt_p), next_noise);
    const nn::Matrix q1 = q1_.forward(t, q1_target_, nxt_p, nn::detach(s.action)).value();
    const nn::Matrix q2 = q2_.forward(t, q2_target_, nxt_p, nn::detach(s.action)).value();
    const double a = alpha();
    for (Eigen::Index i = 0; i < B; ++i) {
      const auto* tr = batch[static_cast<std::size_t>(i)];
      const double soft = std::min(q1(i, 0), q2(i, 0)) - a * s.log_prob.value()(i, 0);
      y(i, 0) = tr->reward + (tr->done ? 0.0 : cfg_.gamma * soft);
    }
  }
  nn::Matrix act(B, 2);
  for (Eigen::Index i = 0; i < B; ++i) {
    act(i, 0) = batch[static_cast<std::size_t>(i)]->action[0];
    act(i, 1) = batch[static_cast<std::size_t>(i)]->action[1];
  }
  nn::Var a = tape.constant(act);
  nn::Var target = tape.constant(y);
  nn::Var l1 = nn::mean(nn::square(nn::sub(q1_.forward(tape, q1_.params(), cur_p, a), target)));
  nn::Var l2 = nn::mean(nn::square(nn::sub(q2_.forward(tape, q2_.params(), cur_p, a), target)));
  return nn::add(l1, l2);
}

UpdateStats SacLearner::update(std::span<const Transition* const> batch, std::mt19937_64& rng) {
  UpdateStats st;
  {
    nn::Tape tape;
    nn::Var loss = critic_loss(tape, batch, gaussian(batch.size(), rng));
    st.critic_loss = loss.value()(0, 0);
    q1_.params().zero_grad();
    q2_.params().zero_grad();
    tape.backward(loss);
    q1_opt_.update(q1_.params());
    q2_opt_.update(q2_.params());
  }
  double mean_logp = 0.0;
  {
    const auto cur = inputs_of(batch, false);
    const auto cur_p = pointers(cur);
    nn::Tape tape;
    const auto s = squashed_sample(actor_->forward(tape, cur_p), gaussian(batch.size(), rng));
    nn::Var q1 = q1_.forward(tape, q1_.params(), cur_p, s.action);
    nn::Var q2 = q2_.forward(tape, q2_.params(), cur_p, s.action);
    nn::Matrix pick = (q1.value().array() <= q2.value().array()).cast<double>().matrix();
    nn::Matrix rest = (1.0 - pick.array()).matrix();
    nn::Var minq = nn::add(nn::mul(q1, tape.constant(pick)), nn::mul(q2, tape.constant(rest)));
    nn::Var loss = nn::mean(nn::sub(nn::scale(s.log_prob, alpha()), minq));
    st.actor_loss = loss.value()(0, 0);
    mean_logp = s.log_prob.value().mean();
    actor_->params().zero_grad();
    tape.backward(loss);
    actor_opt_.update(actor_->params());
  }
  {
    auto& la = log_alpha_.at("log_alpha");
    la.grad(0, 0) = -(mean_logp + cfg_.target_entropy);
    alpha_opt_.update(log_alpha_);
  }
  q1_target_.soft_update_from(q1_.params(), cfg_.tau);
  q2_target_.soft_update_from(q2_.params(), cfg_.tau);
  st.alpha = alpha();
  st.entropy = -mean_logp;
  return st;
}

std::vector<Transition> episode_transitions(const harness::EpisodeLog& log,
                                            const std::vector<std::vector<CapturedStep>>& ticks) {
  std::vector<Transition> out;
  if (ticks.size() != log.ticks.size()) throw StructuralError("captured ticks do not match the episode log");
  for (std::size_t t = 0; t < ticks.size(); ++t) {
    const auto& rec = log.ticks[t];
    for (const auto& step : ticks[t]) {
      const auto k = step.agent;
      const bool done = rec.status[k] != sim::AgentStatus::Active;
      const CapturedStep* next = nullptr;
      if (!done) {
        if (t + 1 >= ticks.size()) continue;
        for (const auto& s : ticks[t + 1])
          if (s.agent == k) next = &s;
        if (next == nullptr) continue;
      }
      Transition tr;
      tr.observation = step.observation;
      tr.neighbor_svos = step.neighbor_svos;
      tr.self_svo = step.self_svo;
      tr.action = rec.actions[k];
      const auto& r = *rec.rewards[k];
      tr.reward_individual = r.individual;
      tr.reward_social = r.social;
      tr.reward = r.total;
      tr.done = done;
      tr.next_observation = done ? step.observation : next->observation;
      tr.next_neighbor_svos = done ? step.neighbor_svos : next->neighbor_svos;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

namespace {

double mean_return(const harness::EpisodeLog& log) {
  if (log.agents.empty()) return 0.0;
  double s = 0.0;
  for (const auto& a : log.agents) s += a.episode_return;
  return s / static_cast<double>(log.agents.size());
}

}  // namespace

SacResult sac_train(const RunConfig& cfg, std::uint64_t seed, const EpisodeCallback& on_episode) {
  validate(cfg);
  RunConfig local = cfg;
  local.mode = SvoMode::TrueSvo;
  SacLearner learner(cfg.decision, cfg.sac, seed);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.sac.buffer_size));
  std::mt19937_64 rng(harness::derive_seed(seed, 5));
  auto random = std::make_shared<decision::RandomPolicy>();
  auto learned = std::make_shared<decision::LearnedPolicy>(learner.actor(), true);

  SacResult result;
  double owed = 0.0;
  int episode = 0;
  while (result.transitions < cfg.sac.total_steps) {
    harness::EpisodeContext ctx{result.transitions < cfg.sac.warmup_steps
                                    ? std::static_pointer_cast<decision::Policy>(random)
                                    : std::static_pointer_cast<decision::Policy>(learned),
                                nullptr};
    std::vector<std::vector<CapturedStep>> captured;
    auto hook = [&](const harness::TickView& view) {
      std::vector<CapturedStep> steps;
      for (std::size_t a = 0; a < view.agents.size(); ++a)
        steps.push_back({view.agents[a], std::make_shared<const obs::Observation>(view.observations[a]),
                         view.inputs[a].self_svo, view.inputs[a].neighbor_svos});
      captured.push_back(std::move(steps));
    };
    const auto log = harness::run_episode(local, harness::derive_seed(seed, 100000 + static_cast<std::uint64_t>(episode)),
                                          ctx, episode, hook);
    auto trans = episode_transitions(log, captured);
    const long added = static_cast<long>(trans.size());
    for (auto& t : trans) buffer.push(std::move(t));
    result.transitions += added;
    const double ret = mean_return(log);
    result.episode_returns.push_back(ret);

    if (result.transitions >= cfg.sac.warmup_steps &&
        buffer.size() >= static_cast<std::size_t>(std::min(cfg.sac.batch_size, cfg.sac.buffer_size))) {
      owed += static_cast<double>(added) * cfg.sac.updates_per_round / std::max(cfg.sac.update_every, 1);
      while (owed >= 1.0) {
        owed -= 1.0;
        const auto idx = buffer.sample(static_cast<std::size_t>(cfg.sac.batch_size), rng);
        std::vector<const Transition*> batch;
        for (auto i : idx) batch.push_back(&buffer.at(i));
        const auto st = learner.update(batch, rng);
        if (!std::isfinite(st.critic_loss) || !std::isfinite(st.actor_loss) || !std::isfinite(st.alpha) ||
            !learner.actor()->params().all_finite())
          throw TrainingError("SAC diverged after " + std::to_string(result.updates.size()) +
                              " updates (critic loss " + std::to_string(st.critic_loss) + ", actor loss " +
                              std::to_string(st.actor_loss) + ")");
        result.updates.push_back(st);
      }
    }
    if (on_episode) on_episode(episode, ret, result.transitions);
    ++episode;
    if (added == 0 && log.ticks.empty()) throw TrainingError("episode produced no transitions");
  }
  result.policy = learner.actor();
  return result;
}

std::vector<double> episode_returns(const RunConfig& cfg, harness::EpisodeContext& ctx, int episodes,
                                    std::uint64_t seed) {
  std::vector<double> out;
  for (int e = 0; e < episodes; ++e)
    out.push_back(mean_return(harness::run_episode(cfg, harness::derive_seed(seed, static_cast<std::uint64_t>(e)), ctx, e)));
  return out;
}

}  // namespace svo::sac
