#include "sherlock/model.hpp"

#include <algorithm>
#include <cmath>

#include "sherlock/errors.hpp"
#include "sherlock/rng.hpp"

namespace sherlock {

void Hyperparams::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(conv_filters, "conv_filters");
  positive(kernel_size, "kernel_size");
  positive(dense1, "dense1");
  positive(dense2, "dense2");
  positive(max_len, "max_len");
  if (heads != kHeadCount) {
    throw ConfigError("heads must be " + std::to_string(kHeadCount));
  }
  if (head_width != 2) throw ConfigError("head_width must be 2");
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (max_len < kernel_size) {
    throw ConfigError("max_len " + std::to_string(max_len) + " is shorter than kernel_size " +
                      std::to_string(kernel_size));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
}

void ModelParams::for_each(const std::function<void(std::string_view, Tensor&)>& fn) {
  fn("embedding", embedding);
  fn("conv.kernels", conv_kernels);
  fn("conv.bias", conv_bias);
  fn("dense1.weights", dense1_weights);
  fn("dense1.bias", dense1_bias);
  fn("dense2.weights", dense2_weights);
  fn("dense2.bias", dense2_bias);
  static const std::array<std::string, kHeadCount> weight_names = {
      "head0.weights", "head1.weights", "head2.weights", "head3.weights", "head4.weights"};
  static const std::array<std::string, kHeadCount> bias_names = {
      "head0.bias", "head1.bias", "head2.bias", "head3.bias", "head4.bias"};
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    fn(weight_names[h], head_weights[h]);
    fn(bias_names[h], head_bias[h]);
  }
}

void ModelParams::for_each(
    const std::function<void(std::string_view, const Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](std::string_view name, Tensor& t) { fn(name, t); });
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](std::string_view, Tensor& t) { t.fill(0.0); });
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
  return n;
}

std::size_t ModelParams::parameter_count_excluding_embedding() const {
  return parameter_count() - embedding.size();
}

std::size_t trunk_parameter_count(const Hyperparams& hp) {
  const auto conv = hp.conv_filters * hp.kernel_size * hp.embed_dim + hp.conv_filters;
  const auto d1 = hp.conv_filters * hp.dense1 + hp.dense1;
  const auto d2 = hp.dense1 * hp.dense2 + hp.dense2;
  const auto heads = hp.heads * (hp.dense2 * hp.head_width + hp.head_width);
  return conv + d1 + d2 + heads;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Model init_model(const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  Model m{hp, {}};
  auto& p = m.params;
  p.embedding = Tensor({hp.vocab_size, hp.embed_dim});
  p.conv_kernels = Tensor({hp.conv_filters, hp.kernel_size, hp.embed_dim});
  p.conv_bias = Tensor({hp.conv_filters});
  p.dense1_weights = Tensor({hp.conv_filters, hp.dense1});
  p.dense1_bias = Tensor({hp.dense1});
  p.dense2_weights = Tensor({hp.dense1, hp.dense2});
  p.dense2_bias = Tensor({hp.dense2});
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    p.head_weights[h] = Tensor({hp.dense2, hp.head_width});
    p.head_bias[h] = Tensor({hp.head_width});
  }

  // Conv fans follow the receptive-field convention: fan_in = K*C, fan_out = K*F.
  Rng rng(seed);
  auto fill = [&](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
    const double bound = glorot_bound(fan_in, fan_out);
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  };
  fill(p.embedding, hp.vocab_size, hp.embed_dim);
  fill(p.conv_kernels, hp.kernel_size * hp.embed_dim, hp.kernel_size * hp.conv_filters);
  fill(p.dense1_weights, hp.conv_filters, hp.dense1);
  fill(p.dense2_weights, hp.dense1, hp.dense2);
  for (auto& w : p.head_weights) fill(w, hp.dense2, hp.head_width);
  return m;
}

namespace {

// Everything backward needs from one forward pass.
struct Trace {
  Tensor embedded;
  Tensor conv_pre;
  Tensor conv_act;
  nn::MaxPoolResult pool;
  nn::DropoutResult drop;
  Tensor d1_pre;
  Tensor d1_act;
  Tensor d2_pre;
  Tensor d2_act;
  HeadProbabilities probs;
};

Trace run_forward(const Model& model, std::span<const TokenId> ids, nn::Mode mode, Rng* rng) {
  const auto& p = model.params;
  if (ids.size() != model.hp.max_len) {
    throw ShapeError("sequence has " + std::to_string(ids.size()) + " ids, model expects " +
                     std::to_string(model.hp.max_len));
  }
  Trace t;
  t.embedded = nn::embedding_forward(ids, p.embedding);
  t.conv_pre = nn::conv1d_forward(t.embedded, p.conv_kernels, p.conv_bias);
  t.conv_act = nn::relu_forward(t.conv_pre);
  t.pool = nn::global_maxpool_forward(t.conv_act);
  if (mode == nn::Mode::Train && model.hp.dropout_rate > 0.0) {
    if (!rng) throw InvalidArgumentError("training forward pass needs a random stream");
    t.drop = nn::dropout_forward(t.pool.output, model.hp.dropout_rate, mode, *rng);
  } else {
    t.drop = {t.pool.output, {}};
  }
  t.d1_pre = nn::dense_forward(t.drop.output, p.dense1_weights, p.dense1_bias);
  t.d1_act = nn::relu_forward(t.d1_pre);
  t.d2_pre = nn::dense_forward(t.d1_act, p.dense2_weights, p.dense2_bias);
  t.d2_act = nn::relu_forward(t.d2_pre);
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    t.probs[h] =
        nn::softmax(nn::dense_forward(t.d2_act, p.head_weights[h], p.head_bias[h]));
  }
  return t;
}

double head_weight(const std::optional<ClassWeights>& w, std::size_t head, std::size_t cls) {
  return w ? (*w)[head][cls] : 1.0;
}

}  // namespace

HeadProbabilities forward(const Model& model, std::span<const TokenId> ids, nn::Mode mode,
                          Rng* rng) {
  return run_forward(model, ids, mode, rng).probs;
}

std::uint64_t sequence_fingerprint(std::span<const TokenId> ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (auto id : ids) {
    for (int byte = 0; byte < 4; ++byte) {
      h ^= (id >> (8 * byte)) & 0xFFU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

LossAndGrads loss_and_grads(const Model& model, std::span<const EncodedSample> batch,
                            std::uint64_t dropout_seed,
                            const std::optional<ClassWeights>& weights) {
  if (batch.empty()) throw EmptyInputError("loss_and_grads needs a non-empty batch");
  const auto& p = model.params;
  LossAndGrads out{0.0, p.zeros_like()};
  auto& g = out.grads;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  // Samples run in batch order and accumulate into one set of gradients,
  // so the reduction order is fixed. Each mask depends only on the seed and
  // the sample, never on its position in the batch.
  for (const auto& sample : batch) {
    Rng rng({dropout_seed, sequence_fingerprint(sample.ids)});
    const Trace t = run_forward(model, sample.ids, nn::Mode::Train, &rng);

    Tensor grad_d2_act(t.d2_act.shape());
    for (std::size_t h = 0; h < kHeadCount; ++h) {
      const std::size_t cls = sample.labels[h] ? 1 : 0;
      const double w = head_weight(weights, h, cls);
      const auto ce = nn::cross_entropy(t.probs[h], cls);
      out.loss += w * ce.loss * inv_batch;

      Tensor grad_logits = ce.logits_grad;
      for (auto& v : grad_logits.data()) v *= w * inv_batch;
      Tensor grad_in(t.d2_act.shape());
      nn::dense_backward_into(t.d2_act, p.head_weights[h], grad_logits, &grad_in,
                              g.head_weights[h], g.head_bias[h]);
      for (std::size_t i = 0; i < grad_in.size(); ++i) grad_d2_act[i] += grad_in[i];
    }

    const Tensor grad_d2_pre = nn::relu_backward(t.d2_pre, grad_d2_act);
    Tensor grad_d1_act(t.d1_act.shape());
    nn::dense_backward_into(t.d1_act, p.dense2_weights, grad_d2_pre, &grad_d1_act,
                            g.dense2_weights, g.dense2_bias);

    const Tensor grad_d1_pre = nn::relu_backward(t.d1_pre, grad_d1_act);
    Tensor grad_drop(t.drop.output.shape());
    nn::dense_backward_into(t.drop.output, p.dense1_weights, grad_d1_pre, &grad_drop,
                            g.dense1_weights, g.dense1_bias);

    const Tensor grad_pool = nn::dropout_backward(t.drop, grad_drop);
    const Tensor grad_conv_act =
        nn::global_maxpool_backward(t.pool.argmax, t.conv_act.dim(0), grad_pool);
    const Tensor grad_conv_pre = nn::relu_backward(t.conv_pre, grad_conv_act);

    Tensor grad_embedded(t.embedded.shape());
    nn::conv1d_backward_into(t.embedded, p.conv_kernels, grad_conv_pre, &grad_embedded,
                             g.conv_kernels, g.conv_bias);
    nn::embedding_backward(sample.ids, grad_embedded, g.embedding);
  }
  return out;
}

double evaluate_loss(const Model& model, std::span<const EncodedSample> samples,
                     const std::optional<ClassWeights>& weights) {
  if (samples.empty()) throw EmptyInputError("evaluate_loss needs at least one sample");
  double total = 0.0;
  for (const auto& s : samples) {
    const auto probs = forward(model, s.ids, nn::Mode::Infer);
    for (std::size_t h = 0; h < kHeadCount; ++h) {
      const std::size_t cls = s.labels[h] ? 1 : 0;
      total += head_weight(weights, h, cls) * nn::cross_entropy(probs[h], cls).loss;
    }
  }
  return total / static_cast<double>(samples.size());
}

ScanResult predict(const Model& model, std::string_view source, const Vocabulary& vocab) {
  const auto tokens = lex(source);
  const auto ids = encode(tokens, vocab, model.hp.max_len);
  const auto probs = forward(model, ids, nn::Mode::Infer);
  ScanResult r;
  for (std::size_t h = 0; h < kHeadCount; ++h) r.vulnerable[h] = probs[h][1];
  r.token_count = std::min(tokens.size(), model.hp.max_len);
  return r;
}

}  // namespace sherlock
