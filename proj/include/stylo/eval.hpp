#pragma once

// Group k-fold planning and classification metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/random.hpp"

namespace stylo {

// ---------------------------------------------------------------------------
// Folds

struct Fold {
  std::vector<std::size_t> train;  // indices into the planned document list
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  std::vector<Fold> folds;

  std::vector<std::string> test_ids(std::size_t fold) const {
    std::vector<std::string> out;
    for (auto i : folds[fold].test) out.push_back(ids[i]);
    return out;
  }
};

// Distinct groups are sorted, shuffled by `seed`, and dealt round-robin to
// the k folds; every document follows its group into that fold's test set.
FoldPlan group_kfold(std::span<const std::string> ids, std::span<const std::string> groups, std::size_t k,
                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

// Rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : k_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return k_; }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::uint64_t& operator()(std::size_t truth, std::size_t pred) { return counts_[truth * k_ + pred]; }

  void add(std::size_t truth, std::size_t pred) {
    if (truth >= k_ || pred >= k_) throw Error(ErrorCode::BadLabel, "class index out of range");
    ++counts_[truth * k_ + pred];
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw Error(ErrorCode::ShapeMismatch, "confusion matrices differ in size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += (*this)(i, i);
    return t;
  }
  std::uint64_t support(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < k_; ++j) t += (*this)(truth, j);
    return t;
  }
  std::uint64_t predicted(std::size_t pred) const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += (*this)(i, pred);
    return t;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_from(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                               std::size_t classes);

// Generalized (K-class) Matthews correlation:
//   (c s - sum_k p_k t_k) / sqrt((s^2 - sum_k p_k^2)(s^2 - sum_k t_k^2))
// with c correct predictions, s samples, t_k true and p_k predicted counts.
// Zero when either factor of the denominator vanishes.
double mcc(const ConfusionMatrix& cm);

struct Metrics {
  double accuracy = 0.0;
  double mcc = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> recall;  // per class; 0 when the class has no support
  ConfusionMatrix confusion;
  std::vector<std::vector<double>> normalized;  // rows divided by support
};

std::vector<std::vector<double>> normalize_rows(const ConfusionMatrix& cm);

// F1 of a class is 2TP / (2TP + FP + FN), or 0 when that denominator is 0;
// macro-F1 averages it over all K classes.
Metrics compute_metrics(const ConfusionMatrix& cm);

}  // namespace stylo
