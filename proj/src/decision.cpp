// SPDX-License-Identifier: Apache-2.0
#include "svodrive/decision.hpp"

#include <algorithm>
#include <cmath>

#include "svodrive/error.hpp"

namespace svo::decision {

void check_input(const PolicyInput& in) {
  if (in.observation == nullptr) throw StructuralError("policy input without observation");
  if (in.neighbor_svos.size() != in.observation->others.size())
    throw StructuralError("neighbor SVOs must align with observed neighbors");
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!ok(in.self_svo)) throw StructuralError("self SVO outside [0, 1]");
  for (double v : in.neighbor_svos)
    if (!ok(v)) throw StructuralError("neighbor SVO outside [0, 1]");
}

DecisionTrunk::DecisionTrunk(nn::ParamStore& store, const std::string& name, const DecisionConfig& cfg) : cfg_(cfg) {
  if (cfg.d_model() % cfg.heads != 0) throw StructuralError("decision heads must divide the model width");
  vehicle_enc_ = nn::DeepSetEncoder(
      store, name + ".vehicle",
      nn::DeepSetConfig{features::vehicle_width(false), cfg.phi_hidden, cfg.rho_hidden, cfg.vehicle_embed});
  svo_proj_ = nn::Linear(store, name + ".svo", 1, cfg.svo_embed);
  static_enc_ = nn::DeepSetEncoder(
      store, name + ".static",
      nn::DeepSetConfig{features::static_width(), cfg.phi_hidden, cfg.rho_hidden, cfg.d_model()});
  mha_ = nn::MultiHeadAttention(store, name + ".mha", {cfg.d_model(), cfg.heads, 3});
}

nn::Var DecisionTrunk::encode(nn::Tape& tape, nn::ParamStore& store, std::span<const PolicyInput* const> batch) const {
  std::vector<const obs::PolylineElement*> vehicles;
  std::vector<const obs::PolylineElement*> statics;
  nn::Matrix svos(0, 1);
  std::vector<double> svo_list;
  std::vector<int> vehicle_start, static_start;
  for (const auto* in : batch) {
    check_input(*in);
    const auto& o = *in->observation;
    vehicle_start.push_back(static_cast<int>(vehicles.size()));
    vehicles.push_back(&o.ego);
    svo_list.push_back(in->self_svo);
    for (std::size_t j = 0; j < o.others.size(); ++j) {
      vehicles.push_back(&o.others[j]);
      svo_list.push_back(in->neighbor_svos[j]);
    }
    static_start.push_back(static_cast<int>(statics.size()));
    for (const auto& e : o.static_elements) statics.push_back(&e);
  }
  svos = Eigen::Map<const nn::Matrix>(svo_list.data(), static_cast<Eigen::Index>(svo_list.size()), 1);

  const auto vb = features::pack_vehicles(vehicles, false, cfg_.scale);
  nn::Var veh = vehicle_enc_.forward(tape, store, tape.constant(vb.rows), vb.elements);
  nn::Var svo_feat = svo_proj_.forward(tape, store, tape.constant(svos));
  const nn::Var vparts[] = {veh, svo_feat};
  nn::Var vehicle_feat = nn::concat_cols(vparts);

  nn::Var all = vehicle_feat;
  const int nv = static_cast<int>(vehicles.size());
  if (!statics.empty()) {
    const auto sb = features::pack_static(statics, cfg_.scale);
    nn::Var static_feat = static_enc_.forward(tape, store, tape.constant(sb.rows), sb.elements);
    const nn::Var parts[] = {vehicle_feat, static_feat};
    all = nn::concat_rows(parts);
  }

  std::vector<int> query_rows, key_rows, key_types;
  nn::Segments qs, ks;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& o = *batch[b]->observation;
    const int m = static_cast<int>(o.others.size());
    const int s = static_cast<int>(o.static_elements.size());
    query_rows.push_back(vehicle_start[b]);
    qs.push(1);
    key_rows.push_back(vehicle_start[b]);
    key_types.push_back(nn::kEgoKey);
    for (int j = 0; j < m; ++j) {
      key_rows.push_back(vehicle_start[b] + 1 + j);
      key_types.push_back(nn::kAgentKey);
    }
    for (int j = 0; j < s; ++j) {
      key_rows.push_back(nv + static_start[b] + j);
      key_types.push_back(nn::kStaticKey);
    }
    ks.push(1 + m + s);
  }
  nn::Var queries = nn::gather_rows(vehicle_feat, query_rows);
  nn::Var kv = nn::gather_rows(all, key_rows);
  return mha_.forward(tape, store, queries, kv, key_types, qs, ks);
}

DecisionNet::DecisionNet(const DecisionConfig& cfg, int outputs) : cfg_(cfg), outputs_(outputs), params_(cfg.seed) {
  if (outputs != 2 && outputs != 4) throw StructuralError("decision head must have 2 or 4 outputs");
  trunk_ = DecisionTrunk(params_, "policy", cfg);
  std::vector<int> widths{cfg.d_model()};
  widths.insert(widths.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
  widths.push_back(outputs);
  head_ = nn::Mlp(params_, "policy.head", widths);
}

nn::Var DecisionNet::forward(nn::Tape& tape, std::span<const PolicyInput* const> batch) {
  return head_.forward(tape, params_, trunk_.encode(tape, params_, batch));
}

PolicyOutput DecisionNet::decide(const PolicyInput& in) {
  return decide(std::span<const PolicyInput>(&in, 1)).front();
}

std::vector<PolicyOutput> DecisionNet::decide(std::span<const PolicyInput> inputs) {
  std::vector<PolicyOutput> out(inputs.size());
  if (inputs.empty()) return out;
  std::vector<const PolicyInput*> ptrs;
  for (const auto& in : inputs) ptrs.push_back(&in);
  nn::Tape tape;
  const nn::Matrix raw = forward(tape, ptrs).value();
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto r = static_cast<Eigen::Index>(b);
    std::array<double, 2> mean{raw(r, 0), raw(r, 1)};
    out[b].action = {std::tanh(mean[0]), std::tanh(mean[1])};
    if (outputs_ == 4) {
      out[b].mean = mean;
      out[b].log_std = std::array<double, 2>{std::clamp(raw(r, 2), kLogStdMin, kLogStdMax),
                                             std::clamp(raw(r, 3), kLogStdMin, kLogStdMax)};
    }
  }
  return out;
}

std::vector<PolicyOutput> LearnedPolicy::act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) {
  auto out = net_->decide(inputs);
  if (!stochastic_) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& o : out) {
    if (!o.mean) continue;
    for (int i = 0; i < 2; ++i) {
      const double u = (*o.mean)[static_cast<std::size_t>(i)] +
                       std::exp((*o.log_std)[static_cast<std::size_t>(i)]) * normal(rng);
      o.action[static_cast<std::size_t>(i)] = std::tanh(u);
    }
  }
  return out;
}

std::vector<PolicyOutput> RandomPolicy::act(std::span<const PolicyInput> inputs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PolicyOutput> out(inputs.size());
  for (auto& o : out) {
    o.action[0] = u(rng);
    o.action[1] = u(rng);
  }
  return out;
}

}  // namespace svo::decision
