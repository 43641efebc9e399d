#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sherlock/metrics.hpp"
#include "sherlock/model.hpp"
#include "sherlock/sample.hpp"

namespace sherlock {

enum class SplitMode { Holdout, KFold };

struct SplitSpec {
  SplitMode mode = SplitMode::Holdout;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  static SplitSpec holdout(std::uint64_t seed) { return {SplitMode::Holdout, 0.8, 0.1, 0.1, 5, seed}; }
  static SplitSpec kfold(std::size_t k, std::uint64_t seed) {
    return {SplitMode::KFold, 0.8, 0.1, 0.1, k, seed};
  }

  void validate() const;
};

/// Index partitions. Holdout: {train, validation, test}. KFold: one entry
/// per fold.
using Partitions = std::vector<std::vector<std::size_t>>;

/// Seeded shuffle, then a stratified interleave (items of each label
/// pattern spread evenly along the sequence), then contiguous slicing.
/// Partitions are disjoint and cover every index.
Partitions split(std::span<const Labels> labels, const SplitSpec& spec);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  Hyperparams hp;
  std::optional<ClassWeights> class_weights;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  metrics::MetricsReport validation_metrics;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, lowest validation loss
};

/// Per-epoch progress callback: (fold or 0, record).
using EpochCallback = std::function<void(std::size_t, const EpochRecord&)>;

struct TrainRun {
  Model model;  // parameters from the epoch with the lowest validation loss
  TrainHistory history;
};

/// Mini-batch Adam on `train`, validating on `validation` after each epoch.
TrainRun train_model(std::span<const EncodedSample> train,
                     std::span<const EncodedSample> validation, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

struct TrainOutcome {
  Model model;                         // holdout model, or the last fold's model
  std::vector<TrainHistory> histories;  // one per run (1 for holdout, k for KFold)
  Partitions partitions;
  /// KFold: mean over folds of each fold's best-epoch validation metrics.
  /// Holdout: metrics of the returned model on the test partition.
  metrics::MetricsReport metrics;
};

TrainOutcome train(std::span<const EncodedSample> dataset, const TrainConfig& config,
                   const SplitSpec& spec, const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  metrics::MetricsReport report;
  std::array<std::vector<double>, kHeadCount> scores;
  std::array<std::vector<std::uint8_t>, kHeadCount> labels;
};

/// Infer-mode pass over `samples`: mean loss, scores and per-head metrics.
Evaluation evaluate_model(const Model& model, std::span<const EncodedSample> samples,
                          double threshold = metrics::kDefaultThreshold,
                          const std::optional<ClassWeights>& weights = std::nullopt);

std::vector<EncodedSample> gather(std::span<const EncodedSample> dataset,
                                  std::span<const std::size_t> indices);

/// One JSON object per epoch per line.
void write_history(std::ostream& out, std::span<const TrainHistory> histories);

}  // namespace sherlock
