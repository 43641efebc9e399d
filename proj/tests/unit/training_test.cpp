#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sherlock/errors.hpp"
#include "sherlock/optimizer.hpp"
#include "sherlock/training.hpp"
#include "synthetic_corpus.hpp"

namespace sherlock {
namespace {

std::vector<Labels> random_labels(std::size_t n, Rng& rng, double rate = 0.3) {
  std::vector<Labels> out(n);
  for (auto& l : out)
    for (auto& b : l) b = rng.uniform() < rate;
  return out;
}

void expect_partition_law(const Partitions& parts, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& p : parts)
    for (auto i : p) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << "index " << i;
}

TEST(Split, HoldoutTenSamples) {
  Rng rng(1);
  const auto labels = random_labels(10, rng);
  const auto parts = split(labels, SplitSpec::holdout(3));
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].size(), 8u);
  EXPECT_EQ(parts[1].size(), 1u);
  EXPECT_EQ(parts[2].size(), 1u);
  expect_partition_law(parts, 10);
}

TEST(Split, KFoldTenSamples) {
  Rng rng(2);
  const auto labels = random_labels(10, rng);
  const auto parts = split(labels, SplitSpec::kfold(5, 3));
  ASSERT_EQ(parts.size(), 5u);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 2u);
  expect_partition_law(parts, 10);
}

TEST(Split, DisjointExhaustiveDeterministicForManySeeds) {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto n = 10 + rng.below(300);
    const auto labels = random_labels(n, rng);
    const auto spec = seed % 2 ? SplitSpec::holdout(seed) : SplitSpec::kfold(2 + seed % 5, seed);
    const auto parts = split(labels, spec);
    expect_partition_law(parts, n);
    EXPECT_EQ(parts, split(labels, spec));
  }
}

TEST(Split, DifferentSeedsDiffer) {
  Rng rng(4);
  const auto labels = random_labels(100, rng);
  EXPECT_NE(split(labels, SplitSpec::holdout(1)), split(labels, SplitSpec::holdout(2)));
}

TEST(Split, StratifiedWhenCountsPermit) {
  const auto corpus = testing::synthetic_corpus({});
  std::vector<Labels> labels;
  for (const auto& r : corpus) labels.push_back(r.labels);
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& spec : {SplitSpec::holdout(seed), SplitSpec::kfold(5, seed)}) {
      const auto parts = split(labels, spec);
      for (std::size_t h = 0; h < kHeadCount; ++h) {
        double global = 0;
        for (const auto& l : labels) global += l[h];
        global /= static_cast<double>(labels.size());
        for (const auto& p : parts) {
          // "Counts permit": at least 10 expected positives in the partition.
          if (global * static_cast<double>(p.size()) < 10.0) continue;
          double pos = 0;
          for (auto i : p) pos += labels[i][h];
          const double rate = pos / static_cast<double>(p.size());
          EXPECT_NEAR(rate / global, 1.0, 0.2) << "head " << h << " size " << p.size();
        }
      }
    }
  }
}

TEST(Split, TooSmallRejected) {
  Rng rng(5);
  EXPECT_THROW(split(random_labels(2, rng), SplitSpec::holdout(0)), InvalidArgumentError);
  EXPECT_THROW(split(random_labels(4, rng), SplitSpec::kfold(5, 0)), InvalidArgumentError);
  EXPECT_THROW(split(random_labels(4, rng), SplitSpec::kfold(1, 0)), ConfigError);
}

Hyperparams tiny_hp(std::size_t vocab) {
  Hyperparams hp;
  hp.embed_dim = 4;
  hp.conv_filters = 8;
  hp.kernel_size = 3;
  hp.dense1 = 6;
  hp.dense2 = 4;
  hp.max_len = 16;
  hp.vocab_size = vocab;
  return hp;
}

std::vector<EncodedSample> random_samples(std::size_t n, const Hyperparams& hp, Rng& rng) {
  std::vector<EncodedSample> out(n);
  for (auto& s : out) {
    s.ids.resize(hp.max_len);
    for (auto& id : s.ids) id = static_cast<TokenId>(rng.below(hp.vocab_size));
    for (auto& l : s.labels) l = static_cast<std::uint8_t>(rng.below(2));
  }
  return out;
}

TEST(Train, SingleStepMatchesManualAdam) {
  Rng rng(6);
  TrainConfig cfg;
  cfg.hp = tiny_hp(10);
  cfg.hp.dropout_rate = 0.0;  // the mask seed is then irrelevant
  cfg.epochs = 1;
  cfg.batch_size = 64;
  cfg.seed = 17;
  const auto train_set = random_samples(12, cfg.hp, rng);
  const auto val_set = random_samples(5, cfg.hp, rng);
  const auto run = train_model(train_set, val_set, cfg);

  Model manual = init_model(cfg.hp, cfg.seed);
  auto state = AdamState::for_params(manual.params);
  const auto lg = loss_and_grads(manual, train_set, 0);
  adam_step(manual.params, lg.grads, state, cfg.hp.learning_rate);

  std::vector<const Tensor*> expected;
  manual.params.for_each([&](std::string_view, const Tensor& t) { expected.push_back(&t); });
  std::size_t i = 0;
  run.model.params.for_each([&](std::string_view name, const Tensor& t) {
    for (std::size_t j = 0; j < t.size(); ++j) ASSERT_NEAR(t[j], (*expected[i])[j], 1e-12) << name;
    ++i;
  });
  ASSERT_EQ(run.history.epochs.size(), 1u);
  EXPECT_NEAR(run.history.epochs[0].train_loss, lg.loss, 1e-12);
  EXPECT_NEAR(run.history.epochs[0].validation_loss, evaluate_loss(manual, val_set), 1e-12);
}

TEST(Train, DeterministicReplay) {
  Rng rng(7);
  TrainConfig cfg;
  cfg.hp = tiny_hp(12);
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.seed = 99;
  const auto data = random_samples(40, cfg.hp, rng);
  const auto a = train(data, cfg, SplitSpec::holdout(cfg.seed));
  const auto b = train(data, cfg, SplitSpec::holdout(cfg.seed));
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.partitions, b.partitions);
  ASSERT_EQ(a.histories.size(), 1u);
  for (std::size_t e = 0; e < a.histories[0].epochs.size(); ++e) {
    EXPECT_EQ(a.histories[0].epochs[e].train_loss, b.histories[0].epochs[e].train_loss);
    EXPECT_EQ(a.histories[0].epochs[e].validation_loss, b.histories[0].epochs[e].validation_loss);
  }
}

TEST(Train, ReturnsBestValidationEpoch) {
  Rng rng(8);
  TrainConfig cfg;
  cfg.hp = tiny_hp(12);
  cfg.hp.learning_rate = 0.05;  // noisy enough that not every epoch improves
  cfg.epochs = 6;
  cfg.batch_size = 4;
  const auto train_set = random_samples(30, cfg.hp, rng);
  const auto val_set = random_samples(10, cfg.hp, rng);
  const auto run = train_model(train_set, val_set, cfg);
  ASSERT_EQ(run.history.epochs.size(), 6u);
  const double returned = evaluate_loss(run.model, val_set);
  for (const auto& r : run.history.epochs) EXPECT_LE(returned, r.validation_loss + 1e-12);
  EXPECT_EQ(returned, run.history.epochs[run.history.best_epoch - 1].validation_loss);
}

TEST(Train, KFoldReturnsPerFoldHistories) {
  Rng rng(9);
  TrainConfig cfg;
  cfg.hp = tiny_hp(10);
  cfg.epochs = 2;
  cfg.batch_size = 8;
  const auto data = random_samples(30, cfg.hp, rng);
  std::vector<std::size_t> folds_seen;
  const auto out = train(data, cfg, SplitSpec::kfold(3, 1),
                         [&](std::size_t fold, const EpochRecord&) { folds_seen.push_back(fold); });
  EXPECT_EQ(out.histories.size(), 3u);
  EXPECT_EQ(folds_seen, (std::vector<std::size_t>{1, 1, 2, 2, 3, 3}));
  // Mean of the best-epoch fold metrics.
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    double mean = 0;
    for (const auto& hist : out.histories) {
      mean += hist.epochs[hist.best_epoch - 1].validation_metrics.heads[h].accuracy / 3.0;
    }
    EXPECT_NEAR(out.metrics.heads[h].accuracy, mean, 1e-12);
  }
}

TEST(Train, NumericFailureCarriesContext) {
  Rng rng(10);
  TrainConfig cfg;
  cfg.hp = tiny_hp(10);
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.class_weights.emplace();
  for (auto& h : *cfg.class_weights) h = {1.0, 1.0};
  (*cfg.class_weights)[3][0] = std::numeric_limits<double>::quiet_NaN();
  (*cfg.class_weights)[3][1] = std::numeric_limits<double>::quiet_NaN();
  const auto data = random_samples(8, cfg.hp, rng);
  try {
    train_model(data, data, cfg);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.hp = tiny_hp(10);
  cfg.epochs = 0;
  Rng rng(11);
  const auto data = random_samples(4, cfg.hp, rng);
  EXPECT_THROW(train_model(data, data, cfg), ConfigError);
  cfg.epochs = 1;
  cfg.batch_size = 0;
  EXPECT_THROW(train_model(data, data, cfg), ConfigError);
  cfg.batch_size = 1;
  EXPECT_THROW(train_model({}, data, cfg), EmptyInputError);
}

TEST(Train, HistoryNdjson) {
  Rng rng(12);
  TrainConfig cfg;
  cfg.hp = tiny_hp(10);
  cfg.epochs = 2;
  cfg.batch_size = 8;
  const auto data = random_samples(20, cfg.hp, rng);
  const auto holdout = train(data, cfg, SplitSpec::holdout(1));
  std::ostringstream out;
  write_history(out, holdout.histories);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_FALSE(j.contains("fold"));
    EXPECT_EQ(j["epoch"], lines + 1);
    EXPECT_TRUE(j["heads"].contains("CWE-120"));
    EXPECT_TRUE(j["heads"]["CWE-120"].contains("f1"));
    ++lines;
  }
  EXPECT_EQ(lines, 2u);

  const auto kfold = train(data, cfg, SplitSpec::kfold(2, 1));
  std::ostringstream kout;
  write_history(kout, kfold.histories);
  EXPECT_NE(kout.str().find("\"fold\":2"), std::string::npos);
}

}  // namespace
}  // namespace sherlock
