// SPDX-License-Identifier: Apache-2.0
#include "svodrive/nn/layers.hpp"

#include "svodrive/error.hpp"

namespace svo::nn {

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Relu:
      return relu(x);
    case Activation::Tanh:
      return tanh(x);
    case Activation::None:
      break;
  }
  return x;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, bool bias)
    : weight_(name + ".w"), in_(in), out_(out) {
  if (in <= 0 || out <= 0) throw StructuralError("linear layer " + name + " needs positive widths");
  store.create(weight_, in, out, in);
  if (bias) {
    bias_ = name + ".b";
    store.create(bias_, 1, out, in);
  }
}

Var Linear::forward(Tape& tape, ParamStore& store, Var x) const {
  if (x.cols() != in_)
    throw StructuralError("linear " + weight_ + ": expected input width " + std::to_string(in_) + ", got " +
                          std::to_string(x.cols()));
  Var y = matmul(x, tape.param(store.at(weight_)));
  if (!bias_.empty()) y = add_row(y, tape.param(store.at(bias_)));
  return y;
}

Mlp::Mlp(ParamStore& store, const std::string& name, std::vector<int> widths, Activation hidden, Activation output)
    : hidden_(hidden), output_(output) {
  if (widths.size() < 2) throw StructuralError("mlp " + name + " needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1]);
}

Var Mlp::forward(Tape& tape, ParamStore& store, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, store, x);
    x = activate(x, i + 1 < layers_.size() ? hidden_ : output_);
  }
  return x;
}

DeepSetEncoder::DeepSetEncoder(ParamStore& store, const std::string& name, const DeepSetConfig& cfg) : cfg_(cfg) {
  if (cfg.phi_hidden.empty()) throw StructuralError("deepset " + name + " needs at least one phi layer");
  std::vector<int> phi{cfg.in};
  phi.insert(phi.end(), cfg.phi_hidden.begin(), cfg.phi_hidden.end());
  phi_ = Mlp(store, name + ".phi", phi, Activation::Relu, Activation::Relu);
  std::vector<int> rho{cfg.phi_hidden.back()};
  rho.insert(rho.end(), cfg.rho_hidden.begin(), cfg.rho_hidden.end());
  rho.push_back(cfg.out);
  rho_ = Mlp(store, name + ".rho", rho, Activation::Relu, Activation::None);
}

Var DeepSetEncoder::forward(Tape& tape, ParamStore& store, Var points, const Segments& elements) const {
  for (int g = 0; g < elements.count(); ++g)
    if (elements.size(g) == 0) throw StructuralError("deepset: empty element");
  Var per_point = phi_.forward(tape, store, points);
  return rho_.forward(tape, store, segment_sum(per_point, elements));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, const AttentionConfig& cfg)
    : cfg_(cfg) {
  if (cfg.heads < 1 || cfg.d_model % cfg.heads != 0)
    throw StructuralError("attention " + name + ": head count must divide d_model");
  wq_ = Linear(store, name + ".q", cfg.d_model, cfg.d_model);
  wk_ = Linear(store, name + ".k", cfg.d_model, cfg.d_model);
  wv_ = Linear(store, name + ".v", cfg.d_model, cfg.d_model);
  wo_ = Linear(store, name + ".o", cfg.d_model, cfg.d_model);
  type_emb_ = name + ".type";
  store.create(type_emb_, cfg.key_types, cfg.d_model, cfg.d_model);
}

Var MultiHeadAttention::forward(Tape& tape, ParamStore& store, Var queries, Var keys_values,
                                std::span<const int> key_types, const Segments& qs, const Segments& ks,
                                std::span<const std::uint8_t> key_mask) const {
  if (static_cast<Eigen::Index>(key_types.size()) != keys_values.rows())
    throw StructuralError("attention: one type per key required");
  Var types = gather_rows(tape.param(store.at(type_emb_)), key_types);
  Var q = wq_.forward(tape, store, queries);
  Var k = wk_.forward(tape, store, add(keys_values, types));
  Var v = wv_.forward(tape, store, keys_values);
  Var att = segmented_attention(q, k, v, qs, ks, cfg_.heads, key_mask);
  return wo_.forward(tape, store, att);
}

}  // namespace svo::nn
