#include "sherlock/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "sherlock/errors.hpp"
#include "sherlock/optimizer.hpp"
#include "sherlock/rng.hpp"

namespace sherlock {

namespace {

// Domain tags keep the split, shuffle and dropout streams independent.
constexpr std::uint64_t kSplitStream = 0x53504c4954;  // "SPLIT"
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

std::uint32_t stratum_of(const Labels& labels) {
  std::uint32_t mask = 0;
  for (std::size_t h = 0; h < kHeadCount; ++h) mask |= (labels[h] ? 1U : 0U) << h;
  return mask;
}

std::size_t rounded_share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

void SplitSpec::validate() const {
  if (mode == SplitMode::KFold) {
    if (folds < 2) throw ConfigError("k-fold split needs k >= 2");
    return;
  }
  for (double f : {train_fraction, validation_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("holdout fractions must lie in (0, 1)");
  }
  if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("holdout fractions must sum to 1");
  }
}

Partitions split(std::span<const Labels> labels, const SplitSpec& spec) {
  spec.validate();
  const auto n = labels.size();
  const std::size_t parts = spec.mode == SplitMode::KFold ? spec.folds : 3;
  if (n < parts) {
    throw InvalidArgumentError("dataset of " + std::to_string(n) + " samples is too small for " +
                               std::to_string(parts) + " partitions");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng({spec.seed, kSplitStream});
  rng.shuffle(order.begin(), order.end());

  // Place the q-th member (in shuffled order) of a stratum of size s at
  // relative position (q + u) / s, u a seeded per-stratum offset in [0, 1);
  // slicing the result keeps every stratum's share roughly equal across
  // partitions, and small strata do not all land in the same one.
  std::vector<std::size_t> stratum_size(1U << kHeadCount, 0);
  for (const auto& l : labels) ++stratum_size[stratum_of(l)];
  std::vector<double> offset(stratum_size.size());
  for (auto& u : offset) u = rng.uniform();
  std::vector<std::size_t> seen(stratum_size.size(), 0);
  std::vector<double> key(n);
  for (auto idx : order) {
    const auto s = stratum_of(labels[idx]);
    key[idx] = (static_cast<double>(seen[s]++) + offset[s]) / static_cast<double>(stratum_size[s]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

  std::vector<std::size_t> bounds;
  if (spec.mode == SplitMode::KFold) {
    for (std::size_t f = 0; f <= parts; ++f) bounds.push_back(f * n / parts);
  } else {
    const auto n_train = rounded_share(spec.train_fraction, n);
    const auto n_val = rounded_share(spec.validation_fraction, n);
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
      throw InvalidArgumentError("dataset of " + std::to_string(n) +
                                 " samples is too small for a holdout split");
    }
    bounds = {0, n_train, n_train + n_val, n};
  }

  Partitions out(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    out[p].assign(order.begin() + static_cast<long>(bounds[p]),
                  order.begin() + static_cast<long>(bounds[p + 1]));
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  hp.validate();
}

std::vector<EncodedSample> gather(std::span<const EncodedSample> dataset,
                                  std::span<const std::size_t> indices) {
  std::vector<EncodedSample> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(dataset[i]);
  return out;
}

Evaluation evaluate_model(const Model& model, std::span<const EncodedSample> samples,
                          double threshold, const std::optional<ClassWeights>& weights) {
  if (samples.empty()) throw EmptyInputError("evaluation needs at least one sample");
  Evaluation ev;
  for (const auto& s : samples) {
    const auto probs = forward(model, s.ids, nn::Mode::Infer);
    for (std::size_t h = 0; h < kHeadCount; ++h) {
      const std::size_t cls = s.labels[h] ? 1 : 0;
      const double w = weights ? (*weights)[h][cls] : 1.0;
      ev.loss += w * nn::cross_entropy(probs[h], cls).loss;
      ev.scores[h].push_back(probs[h][1]);
      ev.labels[h].push_back(s.labels[h]);
    }
  }
  ev.loss /= static_cast<double>(samples.size());
  ev.report = metrics::evaluate(ev.scores, ev.labels, threshold);
  return ev;
}

TrainRun train_model(std::span<const EncodedSample> train,
                     std::span<const EncodedSample> validation, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw EmptyInputError("training set is empty");
  if (validation.empty()) throw EmptyInputError("validation set is empty");

  Model model = init_model(config.hp, config.seed);
  AdamState state = AdamState::for_params(model.params);
  TrainRun run{model, {}};
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng({config.seed, kShuffleStream, epoch});
    shuffle_rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    const auto batches = (train.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto begin = b * config.batch_size;
      const auto end = std::min(begin + config.batch_size, train.size());
      const auto batch =
          gather(train, std::span<const std::size_t>(order).subspan(begin, end - begin));
      const auto dropout_seed = Rng({config.seed, kDropoutStream, epoch, b}).next_u64();
      const std::string where =
          "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": ";
      try {
        auto lg = loss_and_grads(model, batch, dropout_seed, config.class_weights);
        if (!std::isfinite(lg.loss)) throw NonFiniteError("loss is not finite");
        adam_step(model.params, lg.grads, state, config.hp.learning_rate);
        loss_sum += lg.loss * static_cast<double>(batch.size());
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(where + e.what());
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    auto ev = evaluate_model(model, validation, metrics::kDefaultThreshold, config.class_weights);
    record.validation_loss = ev.loss;
    record.validation_metrics = ev.report;
    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      run.model.params = model.params;
      run.history.best_epoch = epoch;
    }
    run.history.epochs.push_back(record);
    if (on_epoch) on_epoch(0, record);
  }
  return run;
}

namespace {

metrics::MetricsReport mean_report(std::span<const metrics::MetricsReport> reports) {
  metrics::MetricsReport mean;
  const double n = static_cast<double>(reports.size());
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    auto& m = mean.heads[h];
    double auc_sum = 0.0;
    std::size_t auc_count = 0;
    for (const auto& r : reports) {
      const auto& x = r.heads[h];
      m.counts.tp += x.counts.tp;
      m.counts.fp += x.counts.fp;
      m.counts.tn += x.counts.tn;
      m.counts.fn += x.counts.fn;
      m.accuracy += x.accuracy / n;
      m.precision += x.precision / n;
      m.recall += x.recall / n;
      m.f1 += x.f1 / n;
      if (x.auc) {
        auc_sum += *x.auc;
        ++auc_count;
      }
    }
    if (auc_count) m.auc = auc_sum / static_cast<double>(auc_count);
  }
  return mean;
}

}  // namespace

TrainOutcome train(std::span<const EncodedSample> dataset, const TrainConfig& config,
                   const SplitSpec& spec, const EpochCallback& on_epoch) {
  std::vector<Labels> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset) labels.push_back(s.labels);

  TrainOutcome out;
  out.partitions = split(labels, spec);

  if (spec.mode == SplitMode::Holdout) {
    const auto train_set = gather(dataset, out.partitions[0]);
    const auto val_set = gather(dataset, out.partitions[1]);
    const auto test_set = gather(dataset, out.partitions[2]);
    auto run = train_model(train_set, val_set, config, on_epoch);
    out.metrics = evaluate_model(run.model, test_set).report;
    out.model = std::move(run.model);
    out.histories.push_back(std::move(run.history));
    return out;
  }

  std::vector<metrics::MetricsReport> fold_reports;
  for (std::size_t f = 0; f < out.partitions.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < out.partitions.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), out.partitions[g].begin(), out.partitions[g].end());
    }
    const auto train_set = gather(dataset, train_idx);
    const auto val_set = gather(dataset, out.partitions[f]);
    auto run = train_model(train_set, val_set, config, [&](std::size_t, const EpochRecord& r) {
      if (on_epoch) on_epoch(f + 1, r);
    });
    fold_reports.push_back(run.history.epochs[run.history.best_epoch - 1].validation_metrics);
    out.histories.push_back(std::move(run.history));
    out.model = std::move(run.model);
  }
  out.metrics = mean_report(fold_reports);
  return out;
}

void write_history(std::ostream& out, std::span<const TrainHistory> histories) {
  for (std::size_t run = 0; run < histories.size(); ++run) {
    for (const auto& r : histories[run].epochs) {
      nlohmann::ordered_json j;
      if (histories.size() > 1) j["fold"] = run + 1;
      j["epoch"] = r.epoch;
      j["train_loss"] = r.train_loss;
      j["val_loss"] = r.validation_loss;
      j["best"] = r.epoch == histories[run].best_epoch;
      auto& heads = j["heads"];
      for (std::size_t h = 0; h < kHeadCount; ++h) {
        const auto& m = r.validation_metrics.heads[h];
        nlohmann::ordered_json hm;
        hm["accuracy"] = m.accuracy;
        hm["precision"] = m.precision;
        hm["recall"] = m.recall;
        hm["f1"] = m.f1;
        hm["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
        heads[std::string(kHeadNames[h])] = hm;
      }
      out << j.dump() << '\n';
    }
  }
}

}  // namespace sherlock
