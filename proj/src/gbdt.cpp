#include "stylo/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "stylo/cart.hpp"
#include "stylo/random.hpp"

namespace stylo {

// Bin edges from the training values of one feature: one bin per distinct
// value when there are at most max_bins of them, otherwise count quantiles.
FeatureBins make_bins(std::vector<double> values, std::size_t max_bins) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, std::size_t>> distinct;
  for (double v : values) {
    if (distinct.empty() || distinct.back().first != v) distinct.emplace_back(v, 0);
    ++distinct.back().second;
  }
  FeatureBins bins;
  const std::size_t d = distinct.size();
  if (max_bins == 0 || d <= max_bins) {
    for (std::size_t i = 0; i + 1 < d; ++i)
      bins.upper.push_back(split_midpoint(distinct[i].first, distinct[i + 1].first));
  } else {
    const double n = static_cast<double>(values.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i + 1 < d && bins.upper.size() + 1 < max_bins; ++i) {
      acc += distinct[i].second;
      const double target = n * static_cast<double>(bins.upper.size() + 1) / static_cast<double>(max_bins);
      if (static_cast<double>(acc) >= target) {
        bins.upper.push_back(split_midpoint(distinct[i].first, distinct[i + 1].first));
      }
    }
  }
  bins.upper.push_back(std::numeric_limits<double>::infinity());
  bins.zero_bin = bins.bin_of(0.0);
  return bins;
}

namespace {

// Sparse binned copy of the training matrix: per row, the (feature, bin)
// pairs whose bin differs from the feature's zero bin.
class BinnedMatrix {
 public:
  BinnedMatrix(const MatrixView& X, std::size_t max_bins) : rows_(X.rows), cols_(X.cols) {
    bins_.reserve(cols_);
    offsets_.push_back(0);
    std::vector<double> column(rows_);
    for (std::size_t f = 0; f < cols_; ++f) {
      for (std::size_t i = 0; i < rows_; ++i) column[i] = X.at(i, f);
      bins_.push_back(make_bins(column, max_bins));
      offsets_.push_back(offsets_.back() + bins_.back().size());
    }
    row_ptr_.push_back(0);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t f = 0; f < cols_; ++f) {
        const double v = X.at(i, f);
        const std::uint32_t b = v == 0.0 ? bins_[f].zero_bin : bins_[f].bin_of(v);
        if (b != bins_[f].zero_bin) entries_.push_back({static_cast<std::uint32_t>(f), b});
      }
      row_ptr_.push_back(entries_.size());
    }
  }

  struct Entry {
    std::uint32_t feature;
    std::uint32_t bin;
  };

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t total_bins() const { return offsets_.back(); }
  std::size_t offset(std::size_t f) const { return offsets_[f]; }
  const FeatureBins& bins(std::size_t f) const { return bins_[f]; }

  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  std::uint32_t bin_at(std::size_t i, std::size_t f) const {
    auto r = row(i);
    auto it =
        std::lower_bound(r.begin(), r.end(), f, [](const Entry& e, std::size_t feat) { return e.feature < feat; });
    if (it != r.end() && it->feature == f) return it->bin;
    return bins_[f].zero_bin;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<FeatureBins> bins_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> row_ptr_;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Tree growth

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t n = 0;
};

struct LeafSplit {
  std::size_t feature = 0;
  std::uint32_t bin = 0;
  double gain = 0.0;
};

struct GrowLeaf {
  int node = 0;
  std::vector<std::uint32_t> rows;
  std::vector<HistBin> hist;
  double g = 0.0;
  double h = 0.0;
  std::size_t depth = 0;
  std::optional<LeafSplit> split;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& data, const BoostConfig& config) : data_(data), config_(config) {}

  Tree grow(std::span<const double> grad, std::span<const double> hess, std::vector<std::uint32_t> rows, int output) {
    grad_ = grad;
    hess_ = hess;
    Tree tree;
    tree.output = output;
    tree.nodes.emplace_back();

    std::vector<GrowLeaf> leaves;
    GrowLeaf root;
    root.rows = std::move(rows);
    for (auto r : root.rows) {
      root.g += grad_[r];
      root.h += hess_[r];
    }
    build_histogram(root);
    find_split(root);
    leaves.push_back(std::move(root));

    while (leaves.size() < config_.num_leaves) {
      // Highest gain first; ties go to the earliest-created leaf.
      std::optional<std::size_t> pick;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].split && (!pick || leaves[i].split->gain > leaves[*pick].split->gain)) pick = i;
      }
      if (!pick) break;
      auto [left, right] = split_leaf(tree, leaves[*pick]);
      leaves[*pick] = std::move(left);
      leaves.push_back(std::move(right));
    }

    for (const auto& leaf : leaves) {
      TreeNode& node = tree.nodes[leaf.node];
      node.cover = static_cast<double>(leaf.rows.size());
      node.value = {-leaf.g / (leaf.h + config_.lambda) * config_.learning_rate};
    }
    return tree;
  }

 private:
  void build_histogram(GrowLeaf& leaf) const {
    leaf.hist.assign(data_.total_bins(), HistBin{});
    for (auto r : leaf.rows) {
      const double g = grad_[r];
      const double h = hess_[r];
      for (const auto& e : data_.row(r)) {
        auto& b = leaf.hist[data_.offset(e.feature) + e.bin];
        b.g += g;
        b.h += h;
        ++b.n;
      }
    }
    const auto n = static_cast<std::uint32_t>(leaf.rows.size());
    for (std::size_t f = 0; f < data_.cols(); ++f) {
      const std::size_t off = data_.offset(f);
      const std::size_t zb = data_.bins(f).zero_bin;
      double g = leaf.g;
      double h = leaf.h;
      std::uint32_t c = n;
      for (std::size_t b = 0; b < data_.bins(f).size(); ++b) {
        if (b == zb) continue;
        g -= leaf.hist[off + b].g;
        h -= leaf.hist[off + b].h;
        c -= leaf.hist[off + b].n;
      }
      leaf.hist[off + zb] = {g, h, c};
    }
  }

  double leaf_score(double g, double h) const { return g * g / (h + config_.lambda); }

  void find_split(GrowLeaf& leaf) const {
    leaf.split.reset();
    if (leaf.depth >= config_.max_depth || leaf.rows.size() < 2 * config_.min_data_in_leaf) return;
    const double parent = leaf_score(leaf.g, leaf.h);
    const auto n = static_cast<std::uint32_t>(leaf.rows.size());
    for (std::size_t f = 0; f < data_.cols(); ++f) {
      const std::size_t off = data_.offset(f);
      const std::size_t nb = data_.bins(f).size();
      double gl = 0.0;
      double hl = 0.0;
      std::uint32_t nl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += leaf.hist[off + b].g;
        hl += leaf.hist[off + b].h;
        nl += leaf.hist[off + b].n;
        const std::uint32_t nr = n - nl;
        if (nl < config_.min_data_in_leaf) continue;
        if (nr < config_.min_data_in_leaf) break;
        const double gr = leaf.g - gl;
        const double hr = leaf.h - hl;
        if (hl < config_.min_sum_hessian || hr < config_.min_sum_hessian) continue;
        const double gain = leaf_score(gl, hl) + leaf_score(gr, hr) - parent;
        if (gain > 0.0 && (!leaf.split || gain > leaf.split->gain)) {
          leaf.split = LeafSplit{f, static_cast<std::uint32_t>(b), gain};
        }
      }
    }
  }

  std::pair<GrowLeaf, GrowLeaf> split_leaf(Tree& tree, GrowLeaf& parent) const {
    const auto split = *parent.split;
    GrowLeaf left, right;
    left.depth = right.depth = parent.depth + 1;
    for (auto r : parent.rows) {
      const bool go_left = data_.bin_at(r, split.feature) <= split.bin;
      GrowLeaf& child = go_left ? left : right;
      child.rows.push_back(r);
      child.g += grad_[r];
      child.h += hess_[r];
    }
    const int l = static_cast<int>(tree.nodes.size());
    TreeNode& node = tree.nodes[parent.node];
    node.feature = static_cast<int>(split.feature);
    node.threshold = data_.bins(split.feature).upper[split.bin];
    node.left = l;
    node.right = l + 1;
    node.cover = static_cast<double>(parent.rows.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    left.node = l;
    right.node = l + 1;

    // Build the smaller child directly, derive the larger by subtraction.
    GrowLeaf& small = left.rows.size() <= right.rows.size() ? left : right;
    GrowLeaf& large = &small == &left ? right : left;
    build_histogram(small);
    large.hist = std::move(parent.hist);
    for (std::size_t i = 0; i < large.hist.size(); ++i) {
      large.hist[i].g -= small.hist[i].g;
      large.hist[i].h -= small.hist[i].h;
      large.hist[i].n -= small.hist[i].n;
    }
    find_split(left);
    find_split(right);
    return {std::move(left), std::move(right)};
  }

  const BinnedMatrix& data_;
  const BoostConfig& config_;
  std::span<const double> grad_;
  std::span<const double> hess_;
};

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

// Mean log-loss of `margins` (rows x outputs) against labels.
double log_loss(std::span<const double> margins, std::size_t outputs, std::span<const std::size_t> y) {
  double total = 0.0;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double* m = margins.data() + i * outputs;
    if (outputs == 1) {
      total += y[i] == 1 ? softplus(-m[0]) : softplus(m[0]);
    } else {
      const double mx = *std::max_element(m, m + outputs);
      double sum = 0.0;
      for (std::size_t k = 0; k < outputs; ++k) sum += std::exp(m[k] - mx);
      total += std::log(sum) + mx - m[y[i]];
    }
  }
  return total / static_cast<double>(n);
}

TreeEnsemble train_gbdt(const MatrixView& X, std::span<const std::size_t> y, const BoostConfig& config,
                        TrainReport* report) {
  config.validate();
  if (X.rows != y.size() || X.rows == 0) throw Error(ErrorCode::ShapeMismatch, "GBDT needs X rows == labels >= 1");
  std::size_t num_class = config.num_class;
  if (num_class == 0) num_class = std::max<std::size_t>(2, *std::max_element(y.begin(), y.end()) + 1);
  if (num_class < 2) throw Error(ErrorCode::BadConfig, "num_class must be >= 2");
  for (auto label : y) {
    if (label >= num_class) throw Error(ErrorCode::BadLabel, "label " + std::to_string(label) + " >= num_class");
  }

  const std::size_t n = X.rows;
  const std::size_t outputs = num_class == 2 ? 1 : num_class;
  const BinnedMatrix data(X, config.max_bins);
  TreeGrower grower(data, config);

  TreeEnsemble model;
  model.kind = ModelKind::Gbdt;
  model.num_features = X.cols;
  for (std::size_t k = 0; k < num_class; ++k) model.classes.push_back(std::to_string(k));
  {
    // Start from the clamped class priors.
    std::vector<double> prior(num_class, 0.0);
    for (auto label : y) prior[label] += 1.0;
    for (double& p : prior) p = std::clamp(p / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    if (outputs == 1)
      model.base_score = {std::log(prior[1] / (1.0 - prior[1]))};
    else
      for (double p : prior) model.base_score.push_back(std::log(p));
  }
  model.config = config.to_json();
  model.config["num_class"] = num_class;

  std::vector<double> margins(n * outputs);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(model.base_score.begin(), model.base_score.end(),
              margins.begin() + static_cast<std::ptrdiff_t>(i * outputs));
  }

  const CounterRng bag_rng(config.seed, "bagging");
  const CounterRng dart_rng(config.seed, "dart");
  const bool bagging = config.bagging_freq > 0 && config.bagging_fraction < 1.0;
  std::vector<std::uint32_t> bag(n);
  std::iota(bag.begin(), bag.end(), 0u);

  std::vector<double> grad(n), hess(n);
  std::vector<double> work(n * outputs);
  std::vector<double> probs(outputs);

  // Adds weight * tree(x) of every tree of `round` into `target`.
  auto add_round = [&](std::size_t round, double scale, std::vector<double>& target) {
    for (std::size_t k = 0; k < outputs; ++k) {
      const std::size_t t = round * outputs + k;
      const Tree& tree = model.trees[t];
      const double w = scale * model.tree_weights[t];
      for (std::size_t i = 0; i < n; ++i) {
        target[i * outputs + tree.output] += w * tree.nodes[tree.leaf_for(X.row(i))].value[0];
      }
    }
  };

  for (std::size_t round = 0; round < config.n_iterations; ++round) {
    if (bagging && round % config.bagging_freq == 0) {
      const auto m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config.bagging_fraction * static_cast<double>(n))));
      std::vector<std::pair<std::uint64_t, std::uint32_t>> keys(n);
      for (std::uint32_t i = 0; i < n; ++i) keys[i] = {bag_rng.bits(round, i), i};
      std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(m), keys.end());
      bag.resize(m);
      for (std::size_t i = 0; i < m; ++i) bag[i] = keys[i].second;
      std::sort(bag.begin(), bag.end());
    }

    // DART: pick earlier rounds to drop and take gradients without them.
    std::vector<std::size_t> dropped;
    if (config.dart.enabled && round > 0 && dart_rng.uniform(round, 0) >= config.dart.skip_drop) {
      for (std::size_t r = 0; r < round && dropped.size() < config.dart.max_drop; ++r) {
        if (dart_rng.uniform(round, r + 1) < config.dart.drop_rate) dropped.push_back(r);
      }
    }
    const std::vector<double>* current = &margins;
    if (!dropped.empty()) {
      work = margins;
      for (auto r : dropped) add_round(r, -1.0, work);
      current = &work;
    }

    const std::size_t first_new = model.trees.size();
    for (std::size_t k = 0; k < outputs; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* m = current->data() + i * outputs;
        if (outputs == 1) {
          const double p = 1.0 / (1.0 + std::exp(-m[0]));
          grad[i] = p - (y[i] == 1 ? 1.0 : 0.0);
          hess[i] = p * (1.0 - p);
        } else {
          const double mx = *std::max_element(m, m + outputs);
          double sum = 0.0;
          for (std::size_t c = 0; c < outputs; ++c) sum += (probs[c] = std::exp(m[c] - mx));
          const double p = probs[k] / sum;
          const double factor = static_cast<double>(outputs) / static_cast<double>(outputs - 1);
          grad[i] = p - (y[i] == k ? 1.0 : 0.0);
          hess[i] = factor * p * (1.0 - p);
        }
      }
      model.trees.push_back(grower.grow(grad, hess, bag, static_cast<int>(k)));
      model.tree_weights.push_back(1.0);
    }

    if (dropped.empty()) {
      add_round(round, 1.0, margins);
    } else {
      // Normalization: with k dropped rounds the new trees get weight
      // 1/(k+1) and every dropped tree is rescaled by k/(k+1).
      const double k = static_cast<double>(dropped.size());
      for (std::size_t t = first_new; t < model.trees.size(); ++t) model.tree_weights[t] = 1.0 / (k + 1.0);
      for (auto r : dropped) {
        for (std::size_t c = 0; c < outputs; ++c) model.tree_weights[r * outputs + c] *= k / (k + 1.0);
      }
      margins = work;
      for (auto r : dropped) add_round(r, 1.0, margins);
      add_round(round, 1.0, margins);
    }
    if (report) report->log_loss.push_back(log_loss(margins, outputs, y));
  }
  return model;
}

}  // namespace stylo
