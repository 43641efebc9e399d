#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sherlock/sample.hpp"

namespace sherlock::metrics {

inline constexpr double kDefaultThreshold = 0.5;

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Predicts positive when score >= threshold. Throws on empty input or
/// mismatched lengths.
ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold = kDefaultThreshold);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero-denominator ratios are 0.
PrecisionRecallF1 prf1(const ConfusionCounts& c);
double f1_score(double precision, double recall);
/// (tp + tn) / n; 0 for no samples.
double accuracy(const ConfusionCounts& c);

/// Mann-Whitney rank AUC with average ranks for ties:
///   (sum of positive ranks - n+(n+ + 1)/2) / (n+ n-)
/// Absent when the labels contain a single class. Throws on mismatched
/// lengths.
std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels);

struct HeadMetrics {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
};

struct MetricsReport {
  std::array<HeadMetrics, kHeadCount> heads{};
};

HeadMetrics evaluate_head(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold = kDefaultThreshold);

/// scores[h][i], labels[h][i] for head h and sample i.
MetricsReport evaluate(const std::array<std::vector<double>, kHeadCount>& scores,
                       const std::array<std::vector<std::uint8_t>, kHeadCount>& labels,
                       double threshold = kDefaultThreshold);

/// Fixed-column text table, two decimals, heads in output order. A missing
/// AUC prints as "n/a".
std::string format_table(const MetricsReport& report);

/// One JSON object per head per line with fields head, accuracy,
/// precision, recall, f1, auc (null when undefined), tp, fp, tn, fn.
/// Full precision.
std::string to_ndjson(const MetricsReport& report);

struct ComparisonRow {
  std::string model;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 comparison of several models on one head.
std::string format_comparison(std::span<const ComparisonRow> rows, const std::string& head);

/// Two-decimal presentation rounding.
std::string format_2dp(double value);

}  // namespace sherlock::metrics
