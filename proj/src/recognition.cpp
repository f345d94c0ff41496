// SPDX-License-Identifier: Apache-2.0
#include "svodrive/recognition.hpp"

#include <cmath>

#include "svodrive/error.hpp"

namespace svo::recog {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full:
      return "full";
    case Variant::WithoutMap:
      return "wo_map";
    case Variant::WithoutAttention:
      return "wo_attention";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "wo_map") return Variant::WithoutMap;
  if (s == "wo_attention") return Variant::WithoutAttention;
  throw ConfigError("unknown recognition variant: " + s);
}

RecognitionNet::RecognitionNet(const RecognitionConfig& cfg) : cfg_(cfg), params_(cfg.seed) {
  nn::DeepSetConfig v{features::vehicle_width(false), cfg.phi_hidden, cfg.rho_hidden, cfg.d_model};
  vehicle_enc_ = nn::DeepSetEncoder(params_, "recog.vehicle", v);
  if (cfg.variant == Variant::Full) {
    nn::DeepSetConfig s{features::static_width(), cfg.phi_hidden, cfg.rho_hidden, cfg.d_model};
    static_enc_ = nn::DeepSetEncoder(params_, "recog.static", s);
  }
  if (cfg.variant != Variant::WithoutAttention)
    mha_ = nn::MultiHeadAttention(params_, "recog.mha", {cfg.d_model, cfg.heads, 3});
  std::vector<int> dec{cfg.d_model};
  dec.insert(dec.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
  dec.push_back(1);
  decoder_ = nn::Mlp(params_, "recog.decoder", dec);
}

nn::Var RecognitionNet::forward(nn::Tape& tape, std::span<const obs::Observation* const> batch) {
  std::vector<const obs::PolylineElement*> vehicles;
  std::vector<const obs::PolylineElement*> statics;
  std::vector<int> vehicle_start, static_start;
  for (const auto* o : batch) {
    if (o->with_svo || !obs::is_svo_free(*o))
      throw StructuralError("recognition input must not carry SVO features");
    vehicle_start.push_back(static_cast<int>(vehicles.size()));
    vehicles.push_back(&o->ego);
    for (const auto& e : o->others) vehicles.push_back(&e);
    static_start.push_back(static_cast<int>(statics.size()));
    if (cfg_.variant == Variant::Full)
      for (const auto& e : o->static_elements) statics.push_back(&e);
  }

  const auto vb = features::pack_vehicles(vehicles, false, cfg_.scale);
  nn::Var vehicle_feat = vehicle_enc_.forward(tape, params_, tape.constant(vb.rows), vb.elements);

  std::vector<int> query_rows;
  nn::Segments qs;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int m = static_cast<int>(batch[b]->others.size());
    for (int j = 0; j < m; ++j) query_rows.push_back(vehicle_start[b] + 1 + j);
    qs.push(m);
  }
  nn::Var queries = nn::gather_rows(vehicle_feat, query_rows);

  nn::Var attended = queries;
  if (cfg_.variant != Variant::WithoutAttention) {
    nn::Var all = vehicle_feat;
    const int nv = static_cast<int>(vehicles.size());
    if (!statics.empty()) {
      const auto sb = features::pack_static(statics, cfg_.scale);
      nn::Var static_feat = static_enc_.forward(tape, params_, tape.constant(sb.rows), sb.elements);
      const nn::Var parts[] = {vehicle_feat, static_feat};
      all = nn::concat_rows(parts);
    }
    std::vector<int> key_rows, key_types;
    nn::Segments ks;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const int m = static_cast<int>(batch[b]->others.size());
      const int s = cfg_.variant == Variant::Full ? static_cast<int>(batch[b]->static_elements.size()) : 0;
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
    nn::Var kv = nn::gather_rows(all, key_rows);
    attended = mha_.forward(tape, params_, queries, kv, key_types, qs, ks);
  }
  nn::Var raw = decoder_.forward(tape, params_, attended);
  return nn::scale(nn::add_scalar(nn::tanh(raw), 1.0), 0.5);
}

RecognitionEstimate RecognitionNet::recognize(const obs::Observation& o) {
  const obs::Observation* one[] = {&o};
  return recognize(one).front();
}

std::vector<RecognitionEstimate> RecognitionNet::recognize(std::span<const obs::Observation* const> batch) {
  std::vector<RecognitionEstimate> out(batch.size());
  std::vector<const obs::Observation*> nonempty;
  for (const auto* o : batch)
    if (!o->others.empty()) nonempty.push_back(o);
  if (nonempty.empty()) return out;
  nn::Tape tape;
  const nn::Matrix est = forward(tape, nonempty).value();
  Eigen::Index r = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t j = 0; j < batch[b]->others.size(); ++j) out[b].push_back(est(r++, 0));
  }
  return out;
}

nn::Var recognition_loss(nn::Var estimates, std::span<const double> targets) {
  if (estimates.cols() != 1 || estimates.rows() != static_cast<Eigen::Index>(targets.size()))
    throw StructuralError("recognition_loss: one target per estimate required");
  if (targets.empty()) throw StructuralError("recognition_loss: empty batch");
  nn::Matrix t(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = targets[i];
  return nn::mean(nn::square(nn::sub(estimates, estimates.tape()->constant(std::move(t)))));
}

double recognition_loss(std::span<const double> estimates, std::span<const double> targets) {
  if (estimates.size() != targets.size()) throw StructuralError("recognition_loss: length mismatch");
  if (targets.empty()) throw StructuralError("recognition_loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) acc += (targets[i] - estimates[i]) * (targets[i] - estimates[i]);
  return acc / static_cast<double>(targets.size());
}

double mean_deviation_error(std::span<const double> estimates, std::span<const double> truths) {
  if (estimates.size() != truths.size()) throw StructuralError("mean_deviation_error: length mismatch");
  if (truths.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) acc += std::abs(estimates[i] - truths[i]);
  return acc / static_cast<double>(truths.size());
}

}  // namespace svo::recog
