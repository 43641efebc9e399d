#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sherlock/model.hpp"
#include "sherlock/tensor.hpp"

namespace sherlock {

/// Adam moments for every parameter tensor plus the step counter.
///
/// Update per coordinate, with t incremented first:
///   m <- b1 m + (1-b1) g
///   v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// eps sits outside the square root, as in the original formulation.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  /// Zero moments shaped like `params`.
  static AdamState for_params(const std::vector<Tensor>& params);
  static AdamState for_params(const ModelParams& params);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One Adam step over parallel lists of tensors. `names` (optional, same
/// length) label tensors in error messages.
void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, const std::vector<std::string>& names = {});

/// Convenience for the full model.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

/// Bit-exact binary checkpoint of the optimizer state (64-bit LE doubles).
void write_adam_state(std::ostream& out, const AdamState& state);
AdamState read_adam_state(std::istream& in);
void save_adam_state(const AdamState& state, const std::filesystem::path& path);
AdamState load_adam_state(const std::filesystem::path& path);

}  // namespace sherlock
