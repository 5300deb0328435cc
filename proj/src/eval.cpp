#include "stylo/eval.hpp"

namespace stylo {

FoldPlan group_kfold(std::span<const std::string> ids, std::span<const std::string> groups, std::size_t k,
                     std::uint64_t seed) {
  if (ids.size() != groups.size()) throw Error(ErrorCode::ShapeMismatch, "ids and groups differ in length");
  std::vector<std::string> distinct(groups.begin(), groups.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (k < 2 || k > distinct.size()) {
    throw Error(ErrorCode::TooFewGroups, "need 2 <= k <= distinct groups (k = " + std::to_string(k) +
                                             ", groups = " + std::to_string(distinct.size()) + ")");
  }
  CounterRng(seed, "group_kfold").shuffle(distinct);
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < distinct.size(); ++i) fold_of[distinct[i]] = i % k;

  FoldPlan plan;
  plan.k = k;
  plan.ids.assign(ids.begin(), ids.end());
  plan.groups.assign(groups.begin(), groups.end());
  plan.folds.resize(k);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t f = fold_of.at(groups[i]);
    for (std::size_t j = 0; j < k; ++j) (j == f ? plan.folds[j].test : plan.folds[j].train).push_back(i);
  }
  return plan;
}

ConfusionMatrix confusion_from(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                               std::size_t classes) {
  if (truth.size() != pred.size()) throw Error(ErrorCode::ShapeMismatch, "truth and predictions differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
  return cm;
}

double mcc(const ConfusionMatrix& cm) {
  const std::uint64_t s = cm.total();
  if (s == 0) throw Error(ErrorCode::EmptyConfusion, "MCC of an empty confusion matrix");
  long double pt = 0.0L, pp = 0.0L, tt = 0.0L;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto t = static_cast<long double>(cm.support(k));
    const auto p = static_cast<long double>(cm.predicted(k));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const long double ls = static_cast<long double>(s);
  const long double num = static_cast<long double>(cm.trace()) * ls - pt;
  const long double den = (ls * ls - pp) * (ls * ls - tt);
  if (den <= 0.0L) return 0.0;
  return static_cast<double>(num / std::sqrt(den));
}

std::vector<std::vector<double>> normalize_rows(const ConfusionMatrix& cm) {
  std::vector<std::vector<double>> out(cm.classes(), std::vector<double>(cm.classes(), 0.0));
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    const auto support = cm.support(i);
    if (support == 0) continue;
    for (std::size_t j = 0; j < cm.classes(); ++j) {
      out[i][j] = static_cast<double>(cm(i, j)) / static_cast<double>(support);
    }
  }
  return out;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  Metrics m;
  m.confusion = cm;
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::EmptyConfusion, "metrics of an empty confusion matrix");
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  m.mcc = mcc(cm);
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto tp = cm(k, k);
    const auto support = cm.support(k);
    const auto predicted = cm.predicted(k);
    m.recall.push_back(support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0);
    const auto den = support + predicted;  // 2TP + FP + FN
    f1_sum += den ? 2.0 * static_cast<double>(tp) / static_cast<double>(den) : 0.0;
  }
  m.macro_f1 = cm.classes() ? f1_sum / static_cast<double>(cm.classes()) : 0.0;
  m.normalized = normalize_rows(cm);
  return m;
}

}  // namespace stylo
