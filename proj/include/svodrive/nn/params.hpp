// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "svodrive/nn/tensor.hpp"

namespace svo::nn {

/// Named parameters, iterated in name order so that initialisation and
/// serialisation are deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  /// Creates a parameter initialised uniformly in +-1/sqrt(fan_in). Throws on duplicate names.
  Parameter& create(const std::string& name, int rows, int cols, int fan_in);
  /// Creates a zero-initialised parameter.
  Parameter& create_zero(const std::string& name, int rows, int cols);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<std::string> names() const;
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  std::map<std::string, Parameter>& entries() { return params_; }
  const std::map<std::string, Parameter>& entries() const { return params_; }

  void zero_grad();
  bool all_finite() const;

  /// Copies values from a store with identical names and shapes.
  void copy_values_from(const ParamStore& other);
  /// this = (1 - tau) * this + tau * other.
  void soft_update_from(const ParamStore& other, double tau);

  /// Little-endian binary checkpoint: magic, version, seed, then name/shape/values records.
  std::vector<std::uint8_t> serialize() const;
  static ParamStore deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);
  /// Overwrites values of existing parameters from a checkpoint (names and shapes must match).
  void load_values(const ParamStore& from);

 private:
  std::map<std::string, Parameter> params_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

/// Zeroes parameter gradients, then runs the reverse sweep from `loss`.
void backward(Tape& tape, Var loss, ParamStore& params);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
};

/// Adam with bias correction. Moment buffers are keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void update(ParamStore& params);
  long step() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamConfig cfg_;
  std::map<std::string, Moments> state_;
  long step_ = 0;
};

}  // namespace svo::nn
