#include "sherlock/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sherlock/errors.hpp"
#include "sherlock/kernels.hpp"

namespace sherlock::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

kernels::ConvDims conv_dims(const Tensor& input, const Tensor& kernels, const Tensor* bias) {
  require_rank(input, 2, "conv1d input");
  require_rank(kernels, 3, "conv1d kernels");
  const kernels::ConvDims d{input.dim(0), input.dim(1), kernels.dim(1), kernels.dim(0)};
  if (kernels.dim(2) != d.channels) {
    throw ShapeError("conv1d channel mismatch: input " + shape_to_string(input.shape()) +
                     ", kernels " + shape_to_string(kernels.shape()));
  }
  if (bias && bias->shape() != Shape{d.filters}) {
    throw ShapeError("conv1d bias " + shape_to_string(bias->shape()) + " does not match " +
                     std::to_string(d.filters) + " filters");
  }
  if (d.length < d.width) {
    throw SequenceTooShortError("sequence of length " + std::to_string(d.length) +
                                " is shorter than kernel width " + std::to_string(d.width));
  }
  return d;
}

kernels::DenseDims dense_dims(const Tensor& input, const Tensor& weights, const Tensor* bias) {
  require_rank(weights, 2, "dense weights");
  if (input.rank() != 1 || input.dim(0) != weights.dim(0) ||
      (bias && bias->shape() != Shape{weights.dim(1)})) {
    throw ShapeError("dense shape mismatch: input " + shape_to_string(input.shape()) +
                     ", weights " + shape_to_string(weights.shape()) +
                     (bias ? ", bias " + shape_to_string(bias->shape()) : std::string()));
  }
  return {weights.dim(0), weights.dim(1)};
}

}  // namespace

Tensor embedding_forward(std::span<const TokenId> ids, const Tensor& table) {
  require_rank(table, 2, "embedding table");
  const auto vocab = table.dim(0);
  const auto width = table.dim(1);
  Tensor out({ids.size(), width});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw OutOfRangeError("token id " + std::to_string(ids[i]) + " at position " +
                            std::to_string(i) + " exceeds vocabulary size " +
                            std::to_string(vocab));
    }
    const auto src = table.data().subspan(ids[i] * width, width);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<long>(i * width));
  }
  return out;
}

void embedding_backward(std::span<const TokenId> ids, const Tensor& grad_out, Tensor& grad_table) {
  const auto width = grad_table.dim(1);
  if (grad_out.shape() != Shape{ids.size(), width}) {
    throw ShapeError("embedding grad " + shape_to_string(grad_out.shape()) +
                     " does not match ids/table");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double* row = grad_table.data().data() + ids[i] * width;
    const double* g = grad_out.data().data() + i * width;
    for (std::size_t c = 0; c < width; ++c) row[c] += g[c];
  }
}

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const auto d = conv_dims(input, kernels, &bias);
  Tensor out({d.out_length(), d.filters});
  kernels::parallel::conv1d_forward(input.data(), kernels.data(), bias.data(), out.data(), d);
  return out;
}

void conv1d_backward_into(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                          Tensor* grad_input, Tensor& grad_kernels, Tensor& grad_bias) {
  const auto d = conv_dims(input, kernels, nullptr);
  if (grad_out.shape() != Shape{d.out_length(), d.filters}) {
    throw ShapeError("conv1d upstream gradient " + shape_to_string(grad_out.shape()) +
                     " does not match output shape");
  }
  require_same_shape(grad_kernels, kernels, "conv1d kernel gradient");
  if (grad_bias.shape() != Shape{d.filters}) throw ShapeError("conv1d bias gradient shape");
  std::span<double> gin;
  if (grad_input) {
    require_same_shape(*grad_input, input, "conv1d input gradient");
    gin = grad_input->data();
  }
  kernels::parallel::conv1d_backward(input.data(), kernels.data(), grad_out.data(), gin,
                                     grad_kernels.data(), grad_bias.data(), d);
}

Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out) {
  Conv1dGrads g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({kernels.dim(0)})};
  conv1d_backward_into(input, kernels, grad_out, &g.input, g.kernels, g.bias);
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_same_shape(input, grad_out, "relu backward");
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  return out;
}

MaxPoolResult global_maxpool_forward(const Tensor& input) {
  require_rank(input, 2, "max pool input");
  const auto steps = input.dim(0);
  const auto features = input.dim(1);
  if (steps == 0) throw EmptyInputError("global max pool over an empty sequence");
  MaxPoolResult r{Tensor({features}), std::vector<std::size_t>(features, 0)};
  for (std::size_t f = 0; f < features; ++f) r.output[f] = input.at(0, f);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t f = 0; f < features; ++f) {
      const double v = input.at(t, f);
      if (v > r.output[f]) {
        r.output[f] = v;
        r.argmax[f] = t;
      }
    }
  }
  return r;
}

Tensor global_maxpool_backward(std::span<const std::size_t> argmax, std::size_t time_steps,
                               const Tensor& grad_out) {
  if (grad_out.shape() != Shape{argmax.size()}) {
    throw ShapeError("max pool upstream gradient " + shape_to_string(grad_out.shape()) +
                     " does not match " + std::to_string(argmax.size()) + " features");
  }
  Tensor out({time_steps, argmax.size()});
  for (std::size_t f = 0; f < argmax.size(); ++f) out.at(argmax[f], f) = grad_out[f];
  return out;
}

DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Infer || rate == 0.0) return {input, {}};
  DropoutResult r{Tensor(input.shape()), std::vector<double>(input.size())};
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.scale[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    r.output[i] = input[i] * r.scale[i];
  }
  return r;
}

DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  return dropout_forward(input, rate, mode, rng);
}

Tensor dropout_backward(const DropoutResult& forward, const Tensor& grad_out) {
  require_same_shape(forward.output, grad_out, "dropout backward");
  if (forward.scale.empty()) return grad_out;
  Tensor out(grad_out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_out[i] * forward.scale[i];
  return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const auto d = dense_dims(input, weights, &bias);
  Tensor out({d.outputs});
  kernels::parallel::dense_forward(input.data(), weights.data(), bias.data(), out.data(), d);
  return out;
}

void dense_backward_into(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                         Tensor* grad_input, Tensor& grad_weights, Tensor& grad_bias) {
  const auto d = dense_dims(input, weights, nullptr);
  if (grad_out.shape() != Shape{d.outputs}) {
    throw ShapeError("dense upstream gradient " + shape_to_string(grad_out.shape()) +
                     " does not match weights " + shape_to_string(weights.shape()));
  }
  require_same_shape(grad_weights, weights, "dense weight gradient");
  if (grad_bias.shape() != Shape{d.outputs}) throw ShapeError("dense bias gradient shape");
  std::span<double> gin;
  if (grad_input) {
    require_same_shape(*grad_input, input, "dense input gradient");
    gin = grad_input->data();
  }
  kernels::parallel::dense_backward(input.data(), weights.data(), grad_out.data(), gin,
                                    grad_weights.data(), grad_bias.data(), d);
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
  DenseGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({weights.dim(1)})};
  dense_backward_into(input, weights, grad_out, &g.input, g.weights, g.bias);
  return g;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax input");
  if (logits.size() == 0) return logits;
  const double top = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& v : out.data()) v /= total;
  return out;
}

CrossEntropyResult cross_entropy(const Tensor& probs, const Tensor& target) {
  require_same_shape(probs, target, "cross entropy");
  std::size_t hot = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      if (hot != target.size()) throw InvalidArgumentError("target has more than one hot slot");
      hot = i;
    } else if (target[i] != 0.0) {
      throw InvalidArgumentError("target entries must be 0 or 1");
    }
  }
  if (hot == target.size()) throw InvalidArgumentError("target has no hot slot");

  CrossEntropyResult r{-std::log(std::max(probs[hot], kProbabilityFloor)), Tensor(probs.shape())};
  for (std::size_t i = 0; i < probs.size(); ++i) r.logits_grad[i] = probs[i] - target[i];
  return r;
}

CrossEntropyResult cross_entropy(const Tensor& probs, std::size_t target_class) {
  if (target_class >= probs.size()) {
    throw InvalidArgumentError("target class " + std::to_string(target_class) +
                               " out of range for " + std::to_string(probs.size()) + " classes");
  }
  Tensor target(probs.shape());
  target[target_class] = 1.0;
  return cross_entropy(probs, target);
}

}  // namespace sherlock::nn
