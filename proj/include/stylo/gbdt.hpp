#pragma once

// Leaf-wise histogram gradient boosting for log-loss (sigmoid for two
// classes, one tree per class per round with softmax otherwise), with row
// bagging and DART tree dropout.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/model.hpp"

namespace stylo {

struct DartConfig {
  bool enabled = true;
  double drop_rate = 0.1;
  double skip_drop = 0.5;  // probability that a round drops nothing
  std::size_t max_drop = 50;
};

struct BoostConfig {
  std::size_t max_depth = 5;
  std::size_t num_leaves = 5;
  double learning_rate = 0.5;
  std::size_t n_iterations = 100;
  std::size_t bagging_freq = 3;  // 0 disables bagging
  double bagging_fraction = 0.8;
  DartConfig dart;
  std::size_t num_class = 0;  // 0 = infer from labels (at least 2)
  std::uint64_t seed = 0;
  double lambda = 1e-3;
  std::size_t min_data_in_leaf = 20;
  double min_sum_hessian = 1e-3;
  std::size_t max_bins = 255;  // 0 = one bin per distinct value

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::BadConfig, what); };
    if (num_leaves < 2) fail("num_leaves must be >= 2");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learning_rate must be in (0, 1]");
    if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) fail("bagging_fraction must be in (0, 1]");
    if (max_depth < 1) fail("max_depth must be >= 1");
    if (!(dart.drop_rate >= 0.0 && dart.drop_rate <= 1.0)) fail("dart drop_rate must be in [0, 1]");
    if (!(dart.skip_drop >= 0.0 && dart.skip_drop <= 1.0)) fail("dart skip_drop must be in [0, 1]");
    if (lambda < 0.0) fail("lambda must be >= 0");
    if (min_data_in_leaf < 1) fail("min_data_in_leaf must be >= 1");
    if (max_bins == 1) fail("max_bins must be 0 or >= 2");
  }

  nlohmann::json to_json() const {
    return {{"max_depth", max_depth},
            {"num_leaves", num_leaves},
            {"learning_rate", learning_rate},
            {"n_iterations", n_iterations},
            {"bagging_freq", bagging_freq},
            {"bagging_fraction", bagging_fraction},
            {"dart",
             {{"enabled", dart.enabled},
              {"drop_rate", dart.drop_rate},
              {"skip_drop", dart.skip_drop},
              {"max_drop", dart.max_drop}}},
            {"num_class", num_class},
            {"seed", seed},
            {"lambda", lambda},
            {"min_data_in_leaf", min_data_in_leaf},
            {"min_sum_hessian", min_sum_hessian},
            {"max_bins", max_bins}};
  }
};

struct TrainReport {
  std::vector<double> log_loss;  // mean training log-loss after each round
};

// ---------------------------------------------------------------------------
// Binning

struct FeatureBins {
  std::vector<double> upper;  // bin b holds x <= upper[b]; last is +inf
  std::uint32_t zero_bin = 0;

  std::uint32_t bin_of(double x) const {
    return static_cast<std::uint32_t>(std::lower_bound(upper.begin(), upper.end(), x) - upper.begin());
  }
  std::size_t size() const { return upper.size(); }
};

// Bin edges from the training values of one feature: one bin per distinct
// value when there are at most max_bins of them, otherwise count quantiles.
FeatureBins make_bins(std::vector<double> values, std::size_t max_bins);

// Mean log-loss of `margins` (rows x outputs) against labels.
double log_loss(std::span<const double> margins, std::size_t outputs, std::span<const std::size_t> y);

TreeEnsemble train_gbdt(const MatrixView& X, std::span<const std::size_t> y, const BoostConfig& config,
                        TrainReport* report = nullptr);

}  // namespace stylo
