// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svodrive/features.hpp"
#include "svodrive/nn/layers.hpp"
#include "svodrive/observation.hpp"

namespace svo::recog {

/// Full model, map-free keys, or a per-neighbour MLP over trajectories only.
enum class Variant { Full, WithoutMap, WithoutAttention };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct RecognitionConfig {
  Variant variant = Variant::Full;
  int d_model = 160;
  int heads = 4;
  std::vector<int> phi_hidden{128, 128};
  std::vector<int> rho_hidden{128};
  std::vector<int> decoder_hidden{128, 128};
  features::FeatureScale scale;
  std::uint64_t seed = 0;
};

/// Per-neighbour SVO estimates in [0, 1], aligned with Observation::others.
using RecognitionEstimate = std::vector<double>;

/// Attention-based SVO recogniser: DeepSet features for ego, neighbours and map; neighbours
/// query all features; a decoder maps each attended feature through tanh onto [0, 1].
class RecognitionNet {
 public:
  explicit RecognitionNet(const RecognitionConfig& cfg);

  const RecognitionConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Estimates for every neighbour of every observation, stacked in order (sum of |others| x 1).
  /// Throws StructuralError when an observation carries SVO features.
  nn::Var forward(nn::Tape& tape, std::span<const obs::Observation* const> batch);

  RecognitionEstimate recognize(const obs::Observation& o);
  /// Batched inference, one estimate vector per observation.
  std::vector<RecognitionEstimate> recognize(std::span<const obs::Observation* const> batch);

  void save(const std::string& path) const { params_.save(path); }
  void load(const std::string& path) { params_.load_values(nn::ParamStore::load(path)); }

 private:
  RecognitionConfig cfg_;
  nn::ParamStore params_;
  nn::DeepSetEncoder vehicle_enc_;
  nn::DeepSetEncoder static_enc_;
  nn::MultiHeadAttention mha_;
  nn::Mlp decoder_;
};

/// Mean of squared errors over all (observer, neighbour) pairs.
nn::Var recognition_loss(nn::Var estimates, std::span<const double> targets);
/// Plain-value version of the same loss.
double recognition_loss(std::span<const double> estimates, std::span<const double> targets);

/// Mean absolute deviation; throws StructuralError on length mismatch.
double mean_deviation_error(std::span<const double> estimates, std::span<const double> truths);

}  // namespace svo::recog
