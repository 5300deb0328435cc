#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "stylo/gbdt.hpp"

using namespace stylo;

namespace {

struct Data {
  std::vector<double> values;
  std::vector<std::size_t> y;
  std::size_t rows = 0, cols = 0;
  MatrixView view() const { return MatrixView(values, rows, cols); }
};

// Class-dependent shift on `informative` features, noise elsewhere.
Data blobs(std::uint64_t seed, std::size_t rows, std::size_t cols, std::size_t K, std::size_t informative,
           double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Data d;
  d.rows = rows;
  d.cols = cols;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t label = i % K;
    d.y.push_back(label);
    for (std::size_t j = 0; j < cols; ++j) {
      d.values.push_back(noise(rng) + (j < informative ? shift * static_cast<double>(label) : 0.0));
    }
  }
  return d;
}

BoostConfig plain(std::size_t rounds) {
  BoostConfig c;
  c.n_iterations = rounds;
  c.dart.enabled = false;
  c.bagging_freq = 0;
  return c;
}

double accuracy(const TreeEnsemble& m, const Data& d) {
  const auto pred = predict(m, d.view());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == d.y[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

std::vector<double> all_margins(const TreeEnsemble& m, const Data& d) {
  std::vector<double> out;
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto mg = predict_margin(m, d.view().row(i));
    out.insert(out.end(), mg.begin(), mg.end());
  }
  return out;
}

}  // namespace

TEST(Gbdt, SeparableBlobFitsWithinTwentyRounds) {
  auto d = blobs(1, 200, 10, 2, 1, 0.0);
  for (std::size_t i = 0; i < d.rows; ++i) d.values[i * d.cols] = d.y[i] == 1 ? 2.0 + 0.01 * i : -0.01 * i;
  const auto model = train_gbdt(d.view(), d.y, [] {
    BoostConfig c;
    c.n_iterations = 20;
    return c;
  }());
  EXPECT_EQ(accuracy(model, d), 1.0);
}

TEST(Gbdt, ConstantLabelsPredictThatClass) {
  auto d = blobs(2, 60, 3, 2, 0, 0.0);
  std::fill(d.y.begin(), d.y.end(), 1);
  BoostConfig c;
  c.num_class = 2;
  const auto model = train_gbdt(d.view(), d.y, c);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> wide(0.0, 10.0);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x = {wide(rng), wide(rng), wide(rng)};
    EXPECT_GE(predict_proba(model, x)[1], 0.99);
  }
}

TEST(Gbdt, LogLossNonIncreasingWithoutDartOrBagging) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const std::size_t K = 2 + seed % 3;
    const auto d = blobs(seed, 150, 6, K, 3, 0.7);
    TrainReport report;
    auto c = plain(100);
    c.seed = seed;
    train_gbdt(d.view(), d.y, c, &report);
    ASSERT_EQ(report.log_loss.size(), 100u);
    for (std::size_t r = 1; r < report.log_loss.size(); ++r) {
      EXPECT_LE(report.log_loss[r], report.log_loss[r - 1] + 1e-12) << "seed " << seed << " round " << r;
    }
  }
}

TEST(Gbdt, ReportedLossMatchesPredictedMargins) {
  // Exercises DART reweighting: the margins tracked during training must be
  // the ones the final weighted ensemble produces.
  for (std::size_t K : {2u, 4u}) {
    const auto d = blobs(7, 120, 5, K, 2, 1.0);
    BoostConfig c;
    c.n_iterations = 40;
    c.dart.drop_rate = 0.3;
    c.dart.skip_drop = 0.2;
    c.min_data_in_leaf = 5;
    TrainReport report;
    const auto model = train_gbdt(d.view(), d.y, c, &report);
    EXPECT_NEAR(log_loss(all_margins(model, d), model.num_outputs(), d.y), report.log_loss.back(), 1e-9);
    EXPECT_TRUE(std::any_of(model.tree_weights.begin(), model.tree_weights.end(), [](double w) { return w != 1.0; }));
  }
}

TEST(Gbdt, MarginsAreAdditiveOverRounds) {
  for (std::size_t K : {2u, 3u}) {
    const auto d = blobs(11, 100, 4, K, 2, 1.0);
    const auto full = train_gbdt(d.view(), d.y, plain(12));
    const auto shorter = train_gbdt(d.view(), d.y, plain(11));
    const std::size_t per_round = full.num_outputs();
    TreeEnsemble trimmed = full;
    trimmed.trees.resize(trimmed.trees.size() - per_round);
    trimmed.tree_weights.resize(trimmed.trees.size());
    EXPECT_EQ(all_margins(trimmed, d), all_margins(shorter, d));
  }
}

TEST(Gbdt, TreeShapeRespectsCaps) {
  const auto d = blobs(5, 300, 8, 3, 4, 0.8);
  BoostConfig c;
  c.n_iterations = 10;
  c.num_leaves = 5;
  c.max_depth = 3;
  const auto model = train_gbdt(d.view(), d.y, c);
  EXPECT_EQ(model.trees.size(), 30u);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    EXPECT_LE(model.trees[t].num_leaves(), 5u);
    EXPECT_LE(model.trees[t].depth(), 3);
    EXPECT_EQ(model.trees[t].output, static_cast<int>(t % 3));
    for (const auto& n : model.trees[t].nodes) {
      if (n.is_leaf())
        EXPECT_EQ(n.value.size(), 1u);
      else
        EXPECT_TRUE(std::isfinite(n.threshold));
    }
  }
}

TEST(Gbdt, FixedSeedIsBitIdentical) {
  const auto d = blobs(3, 150, 6, 3, 3, 0.5);
  BoostConfig c;
  c.n_iterations = 30;
  c.seed = 99;
  const auto a = save_model_string(train_gbdt(d.view(), d.y, c));
  const auto b = save_model_string(train_gbdt(d.view(), d.y, c));
  EXPECT_EQ(a, b);
  c.seed = 100;
  EXPECT_NE(save_model_string(train_gbdt(d.view(), d.y, c)), a);
}

TEST(Gbdt, TinyLearningRateStaysAtBaseScore) {
  const auto d = blobs(6, 80, 3, 3, 2, 1.0);
  BoostConfig c = plain(5);
  c.learning_rate = 1e-9;
  const auto model = train_gbdt(d.view(), d.y, c);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto m = predict_margin(model, d.view().row(i));
    for (std::size_t k = 0; k < m.size(); ++k) EXPECT_NEAR(m[k], model.base_score[k], 1e-6);
  }
}

TEST(Gbdt, ProbabilitiesSumToOne) {
  const auto d = blobs(8, 120, 5, 4, 3, 0.9);
  const auto model = train_gbdt(d.view(), d.y, plain(20));
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto p = predict_proba(model, d.view().row(i));
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Gbdt, ExactBinsWhenFewDistinctValues) {
  const auto bins = make_bins({3.0, 1.0, 2.0, 2.0, 1.0}, 255);
  EXPECT_EQ(bins.size(), 3u);
  EXPECT_EQ(bins.bin_of(1.0), 0u);
  EXPECT_EQ(bins.bin_of(2.0), 1u);
  EXPECT_EQ(bins.bin_of(2.5), 1u);
  EXPECT_EQ(bins.bin_of(2.6), 2u);
  EXPECT_EQ(bins.bin_of(100.0), 2u);
  const auto many = make_bins(
      [] {
        std::vector<double> v;
        for (int i = 0; i < 5000; ++i) v.push_back(i * 0.5);
        return v;
      }(),
      255);
  EXPECT_LE(many.size(), 255u);
}

TEST(Gbdt, RejectsInvalidInput) {
  const auto d = blobs(9, 20, 2, 2, 1, 1.0);
  BoostConfig c;
  c.num_leaves = 1;
  EXPECT_THROW(train_gbdt(d.view(), d.y, c), Error);
  c = BoostConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(train_gbdt(d.view(), d.y, c), Error);
  c = BoostConfig{};
  c.num_class = 2;
  auto y = d.y;
  y[0] = 7;
  EXPECT_THROW(train_gbdt(d.view(), y, c), Error);
  y.pop_back();
  EXPECT_THROW(train_gbdt(d.view(), y, BoostConfig{}), Error);
}
