#include "sherlock/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "sherlock/errors.hpp"

namespace sherlock::metrics {

namespace {

void check_lengths(std::size_t scores, std::size_t labels) {
  if (scores != labels) {
    throw InvalidArgumentError("scores and labels differ in length (" + std::to_string(scores) +
                               " vs " + std::to_string(labels) + ")");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold) {
  check_lengths(scores.size(), labels.size());
  if (scores.empty()) throw EmptyInputError("confusion counts need at least one sample");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

PrecisionRecallF1 prf1(const ConfusionCounts& c) {
  PrecisionRecallF1 r;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

double accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
  check_lengths(scores.size(), labels.size());
  const auto n = scores.size();
  const auto positives =
      static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
  const auto negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a run of ties [i, j) shares the mean rank (i+1+j)/2.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) positive_rank_sum += rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

HeadMetrics evaluate_head(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold) {
  HeadMetrics m;
  m.counts = confusion(scores, labels, threshold);
  const auto p = prf1(m.counts);
  m.accuracy = accuracy(m.counts);
  m.precision = p.precision;
  m.recall = p.recall;
  m.f1 = p.f1;
  m.auc = roc_auc(scores, labels);
  return m;
}

MetricsReport evaluate(const std::array<std::vector<double>, kHeadCount>& scores,
                       const std::array<std::vector<std::uint8_t>, kHeadCount>& labels,
                       double threshold) {
  MetricsReport r;
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    r.heads[h] = evaluate_head(scores[h], labels[h], threshold);
  }
  return r;
}

std::string format_2dp(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  // Never print "-0.00".
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::string format_table(const MetricsReport& report) {
  constexpr std::size_t kLabel = 14;
  constexpr std::size_t kCell = 10;
  std::ostringstream out;
  out << pad_right("Metric (CWE)", kLabel);
  for (const char* col : {"Accuracy", "Precision", "Recall", "F1 Score", "AUC"}) {
    out << pad_left(col, kCell);
  }
  out << '\n' << std::string(kLabel + 5 * kCell, '-') << '\n';
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto& m = report.heads[h];
    out << pad_right(std::string(kHeadNames[h]), kLabel);
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) out << pad_left(format_2dp(v), kCell);
    out << pad_left(m.auc ? format_2dp(*m.auc) : "n/a", kCell) << '\n';
  }
  return out.str();
}

std::string to_ndjson(const MetricsReport& report) {
  std::string out;
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto& m = report.heads[h];
    nlohmann::ordered_json j;
    j["head"] = kHeadNames[h];
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
    j["tp"] = m.counts.tp;
    j["fp"] = m.counts.fp;
    j["tn"] = m.counts.tn;
    j["fn"] = m.counts.fn;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string format_comparison(std::span<const ComparisonRow> rows, const std::string& head) {
  std::size_t label = std::string("Model").size();
  for (const auto& r : rows) label = std::max(label, r.model.size());
  label += 2;
  constexpr std::size_t kCell = 11;
  std::ostringstream out;
  out << "Comparison on " << head << '\n';
  out << pad_right("Model", label);
  for (const char* col : {"Precision", "Recall", "F1 Score"}) out << pad_left(col, kCell);
  out << '\n' << std::string(label + 3 * kCell, '-') << '\n';
  for (const auto& r : rows) {
    out << pad_right(r.model, label);
    for (double v : {r.precision, r.recall, r.f1}) out << pad_left(format_2dp(v), kCell);
    out << '\n';
  }
  return out.str();
}

}  // namespace sherlock::metrics
