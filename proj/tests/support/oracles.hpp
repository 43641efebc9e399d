#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sherlock/metrics.hpp"

namespace sherlock::testing {

/// Straight per-sample recount, no shared code with the library.
metrics::ConfusionCounts recount(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels, double threshold);

/// O(n^2) AUC: fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half.
std::optional<double> pairwise_auc(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels);

}  // namespace sherlock::testing
