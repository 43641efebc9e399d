#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sherlock/layers.hpp"
#include "sherlock/sample.hpp"
#include "sherlock/tensor.hpp"
#include "sherlock/tokenizer.hpp"

namespace sherlock {

struct Hyperparams {
  std::size_t embed_dim = 13;
  std::size_t conv_filters = 512;
  std::size_t kernel_size = 9;
  std::size_t dense1 = 64;
  std::size_t dense2 = 16;
  std::size_t heads = kHeadCount;
  std::size_t head_width = 2;
  double dropout_rate = 0.5;
  double learning_rate = 0.005;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t vocab_size = 0;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Every learnable array of the network.
struct ModelParams {
  Tensor embedding;       // [V x E]
  Tensor conv_kernels;    // [F x K x E]
  Tensor conv_bias;       // [F]
  Tensor dense1_weights;  // [F x D1]
  Tensor dense1_bias;     // [D1]
  Tensor dense2_weights;  // [D1 x D2]
  Tensor dense2_bias;     // [D2]
  std::array<Tensor, kHeadCount> head_weights;  // [D2 x 2] each
  std::array<Tensor, kHeadCount> head_bias;     // [2] each

  /// Visits tensors in declaration order (the order used on disk and by
  /// the optimizer) with a stable name such as "dense1.weights".
  void for_each(const std::function<void(std::string_view, Tensor&)>& fn);
  void for_each(const std::function<void(std::string_view, const Tensor&)>& fn) const;

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;

  std::size_t parameter_count() const;
  std::size_t parameter_count_excluding_embedding() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Model {
  Hyperparams hp;
  ModelParams params;
};

/// Parameters excluding the embedding table, from hyperparameters alone.
std::size_t trunk_parameter_count(const Hyperparams& hp);

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases,
/// drawn in declaration order from one stream seeded by `seed`.
Model init_model(const Hyperparams& hp, std::uint64_t seed);

/// Glorot bound for a dense layer of the given fans.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

using HeadProbabilities = std::array<Tensor, kHeadCount>;

/// Runs the network on one encoded sequence. In Train mode dropout draws
/// its mask from `rng`; in Infer mode `rng` is unused and may be null.
HeadProbabilities forward(const Model& model, std::span<const TokenId> ids, nn::Mode mode,
                          Rng* rng = nullptr);

/// Optional loss weights, weights[head][class]. Default: all 1.
using ClassWeights = std::array<std::array<double, 2>, kHeadCount>;

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean over the batch of the (weighted) sum of the five head
/// cross-entropies, with gradients by backprop. Dropout is active; each
/// sample's mask is seeded by `dropout_seed` and the sample's ids, so the
/// result does not depend on batch order.
LossAndGrads loss_and_grads(const Model& model, std::span<const EncodedSample> batch,
                            std::uint64_t dropout_seed,
                            const std::optional<ClassWeights>& weights = std::nullopt);

/// FNV-1a over the id sequence.
std::uint64_t sequence_fingerprint(std::span<const TokenId> ids);

/// Loss only, Infer mode (no dropout). Used for validation.
double evaluate_loss(const Model& model, std::span<const EncodedSample> samples,
                     const std::optional<ClassWeights>& weights = std::nullopt);

struct ScanResult {
  std::array<double, kHeadCount> vulnerable{};  // P(vulnerable) per head
  std::size_t token_count = 0;
};

/// lex -> encode -> forward(Infer) -> second softmax slot of each head.
ScanResult predict(const Model& model, std::string_view source, const Vocabulary& vocab);

}  // namespace sherlock
