// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svodrive/config.hpp"
#include "svodrive/harness.hpp"
#include "svodrive/recognition.hpp"

namespace svo::recog {

/// Recognition-mode observation of one agent at one tick with the true SVO of each neighbour.
struct RecognitionSample {
  obs::Observation observation;
  std::vector<int> neighbor_ids;
  std::vector<double> targets;
  int episode = 0;
  int tick = 0;
};

struct DatasetHeader {
  int version = 1;
  std::string scenario;
  std::string config_digest;
  std::uint64_t seed = 0;
  int episodes = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<RecognitionSample> samples;
};

/// Runs `episodes` closed-loop episodes with true SVOs and records recognition samples.
/// Episode e uses seed derive_seed(seed, e) and carries episode id `first_episode + e`.
Dataset generate_dataset(const RunConfig& cfg, harness::EpisodeContext& ctx, int episodes, std::uint64_t seed,
                         int first_episode = 0);

std::string sample_to_line(const RecognitionSample& s);
RecognitionSample sample_from_line(const std::string& line);

/// Writes `path` (header line, then one sample per line) and the byte-offset sidecar `path.idx`.
void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
/// Reads sample `i` through the index sidecar without parsing the rest of the file.
RecognitionSample read_sample(const std::filesystem::path& path, std::size_t i);
std::filesystem::path index_path(const std::filesystem::path& path);

/// Episode-level split: the held-out set holds ceil(fraction * episodes) whole episodes (at least one
/// when two or more exist), chosen by a seeded shuffle.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
Split split_by_episode(const std::vector<RecognitionSample>& samples, double holdout_fraction, std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double holdout_mde = 0.0;
  bool checkpoint = false;  // new best held-out loss
};

struct TrainResult {
  std::unique_ptr<RecognitionNet> net;  // restored to the best held-out epoch
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_holdout_loss = 0.0;
  Split split;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minibatch Adam on the recognition loss with early stopping on held-out loss.
/// Throws TrainingError when the loss becomes non-finite.
TrainResult train_recognition(const std::vector<RecognitionSample>& samples, const RecognitionConfig& model,
                              const RecognitionTrainConfig& train, std::uint64_t seed, const EpochCallback& on_epoch = {});

struct RecognitionEval {
  double mse = 0.0;
  double mde = 0.0;
  int pairs = 0;
  harness::Stat episode_mde;              // per-episode mean deviation, mean and standard error
  std::vector<double> mde_by_tick;        // NaN where no sample exists
  double mean_predictor_mde = 0.0;        // |target - 0.5| averaged over the same pairs
};

RecognitionEval evaluate_recognition(RecognitionNet& net, const std::vector<RecognitionSample>& samples,
                                     std::span<const std::size_t> subset = {}, int batch_size = 256);

}  // namespace svo::recog
