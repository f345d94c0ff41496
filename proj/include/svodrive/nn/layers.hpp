// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "svodrive/nn/params.hpp"

namespace svo::nn {

enum class Activation { None, Relu, Tanh };

Var activate(Var x, Activation a);

/// y = x W + b with W stored as (in x out). Layers hold parameter names, so one layer
/// object can evaluate against any store with matching names (e.g. target networks).
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, bool bias = true);

  Var forward(Tape& tape, ParamStore& store, Var x) const;
  int in() const { return in_; }
  int out() const { return out_; }
  const std::string& weight_name() const { return weight_; }
  const std::string& bias_name() const { return bias_; }

 private:
  std::string weight_;
  std::string bias_;
  int in_ = 0;
  int out_ = 0;
};

/// Stack of Linear layers; `widths` = {in, hidden..., out}.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, std::vector<int> widths, Activation hidden = Activation::Relu,
      Activation output = Activation::None);

  Var forward(Tape& tape, ParamStore& store, Var x) const;
  int in() const { return layers_.empty() ? 0 : layers_.front().in(); }
  int out() const { return layers_.empty() ? 0 : layers_.back().out(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::None;
};

struct DeepSetConfig {
  int in = 0;
  std::vector<int> phi_hidden{128, 128};
  std::vector<int> rho_hidden{128};
  int out = 160;
};

/// Permutation-invariant set encoder: rho(sum over points of phi(point)).
class DeepSetEncoder {
 public:
  DeepSetEncoder() = default;
  DeepSetEncoder(ParamStore& store, const std::string& name, const DeepSetConfig& cfg);

  /// `points` stacks every element's point features; `elements` marks their row ranges.
  /// Returns one row per element. Throws StructuralError on an empty element.
  Var forward(Tape& tape, ParamStore& store, Var points, const Segments& elements) const;
  const DeepSetConfig& config() const { return cfg_; }

 private:
  DeepSetConfig cfg_;
  Mlp phi_;
  Mlp rho_;
};

struct AttentionConfig {
  int d_model = 160;
  int heads = 4;
  int key_types = 3;  // ego, other agent, static

  int head_dim() const { return d_model / heads; }
};

enum KeyType : int { kEgoKey = 0, kAgentKey = 1, kStaticKey = 2 };

/// Multi-head attention with a learned type embedding added to keys before projection.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, const AttentionConfig& cfg);

  Var forward(Tape& tape, ParamStore& store, Var queries, Var keys_values, std::span<const int> key_types,
              const Segments& query_segments, const Segments& key_segments,
              std::span<const std::uint8_t> key_mask = {}) const;

  const AttentionConfig& config() const { return cfg_; }
  const Linear& query_proj() const { return wq_; }
  const Linear& key_proj() const { return wk_; }
  const Linear& value_proj() const { return wv_; }
  const Linear& output_proj() const { return wo_; }
  const std::string& type_embedding_name() const { return type_emb_; }

 private:
  AttentionConfig cfg_;
  Linear wq_, wk_, wv_, wo_;
  std::string type_emb_;
};

}  // namespace svo::nn
