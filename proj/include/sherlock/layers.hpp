#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sherlock/rng.hpp"
#include "sherlock/tensor.hpp"
#include "sherlock/tokenizer.hpp"

// Forward/backward pairs for every layer of the network. All functions are
// pure; backward passes take whatever the forward pass cached.
namespace sherlock::nn {

enum class Mode { Train, Infer };

// -- embedding ---------------------------------------------------------------

/// [L] ids x [V x D] table -> [L x D]. Throws OutOfRangeError on id >= V.
Tensor embedding_forward(std::span<const TokenId> ids, const Tensor& table);
/// Adds each row of `grad_out` into `grad_table` at the row of its id.
void embedding_backward(std::span<const TokenId> ids, const Tensor& grad_out, Tensor& grad_table);

// -- conv1d (valid, stride 1) ------------------------------------------------

struct Conv1dGrads {
  Tensor input;    // [L x C]
  Tensor kernels;  // [F x K x C]
  Tensor bias;     // [F]
};

/// [L x C] * [F x K x C] + [F] -> [(L-K+1) x F].
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);
Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out);
/// Accumulating variant used by the model; `grad_input` may be null.
void conv1d_backward_into(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                          Tensor* grad_input, Tensor& grad_kernels, Tensor& grad_bias);

// -- relu ----------------------------------------------------------------------

Tensor relu_forward(const Tensor& input);
/// Passes `grad_out` where input > 0; the subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// -- global max pooling over time -------------------------------------------

struct MaxPoolResult {
  Tensor output;                     // [F]
  std::vector<std::size_t> argmax;   // first t attaining the max, per feature
};

MaxPoolResult global_maxpool_forward(const Tensor& input);
/// Routes grad_out[f] to row argmax[f] of a zero [T x F] tensor.
Tensor global_maxpool_backward(std::span<const std::size_t> argmax, std::size_t time_steps,
                               const Tensor& grad_out);

// -- inverted dropout ----------------------------------------------------------

struct DropoutResult {
  Tensor output;
  /// Per element: 0 for dropped, 1/(1-rate) for kept. Empty in Infer mode.
  std::vector<double> scale;
};

DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng);
DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, std::uint64_t seed);
Tensor dropout_backward(const DropoutResult& forward, const Tensor& grad_out);

// -- dense ---------------------------------------------------------------------

struct DenseGrads {
  Tensor input;    // [N]
  Tensor weights;  // [N x M]
  Tensor bias;     // [M]
};

/// out = input^T * weights + bias.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);
void dense_backward_into(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                         Tensor* grad_input, Tensor& grad_weights, Tensor& grad_bias);

// -- softmax + categorical cross-entropy ---------------------------------------

Tensor softmax(const Tensor& logits);

inline constexpr double kProbabilityFloor = 1e-12;

struct CrossEntropyResult {
  double loss;
  Tensor logits_grad;  // probs - target, the fused softmax+CE gradient
};

/// loss = -ln(max(probs[target], 1e-12)). `target` must be one-hot.
CrossEntropyResult cross_entropy(const Tensor& probs, const Tensor& target);
/// Convenience for a class index; builds the one-hot internally.
CrossEntropyResult cross_entropy(const Tensor& probs, std::size_t target_class);

}  // namespace sherlock::nn
