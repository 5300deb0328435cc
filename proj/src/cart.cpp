#include "stylo/cart.hpp"

namespace stylo {

namespace {

using Wide = __int128;

// Children's weighted impurity is n - sum_c(S_c / n_c) with S_c the sum of
// squared class counts, so the best split maximizes S_l/n_l + S_r/n_r. Kept as
// an exact fraction (S_l n_r + S_r n_l) / (n_l n_r).
struct Score {
  Wide num = 0;
  Wide den = 1;

  bool better_than(const Score& o) const { return num * o.den > o.num * den; }
};

Score score(std::int64_t sl, std::int64_t nl, std::int64_t sr, std::int64_t nr) {
  return {static_cast<Wide>(sl) * nr + static_cast<Wide>(sr) * nl, static_cast<Wide>(nl) * nr};
}

double gini_of(const std::vector<std::size_t>& counts, std::size_t n) {
  double s = 0.0;
  for (auto c : counts) s += static_cast<double>(c) * static_cast<double>(c);
  return 1.0 - s / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace

double split_midpoint(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid >= b ? a : mid;
}

std::optional<CartSplit> best_cart_split(const MatrixView& X, std::span<const std::size_t> y, std::size_t num_classes,
                                         std::span<const std::size_t> rows) {
  const std::size_t n = rows.size();
  std::vector<std::size_t> total(num_classes, 0);
  for (auto r : rows) ++total[y[r]];

  std::optional<CartSplit> best;
  Score best_score;
  std::vector<std::pair<double, std::size_t>> column(n);
  std::vector<std::size_t> left(num_classes), right(num_classes);

  for (std::size_t f = 0; f < X.cols; ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {X.at(rows[i], f), y[rows[i]]};
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0);
    right = total;
    std::int64_t sl = 0;
    std::int64_t sr = 0;
    for (auto c : total) sr += static_cast<std::int64_t>(c) * static_cast<std::int64_t>(c);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t cls = column[i].second;
      sl += 2 * static_cast<std::int64_t>(left[cls]) + 1;
      sr -= 2 * static_cast<std::int64_t>(right[cls]) - 1;
      ++left[cls];
      --right[cls];
      if (column[i].first == column[i + 1].first) continue;
      const auto nl = static_cast<std::int64_t>(i + 1);
      const auto nr = static_cast<std::int64_t>(n - i - 1);
      const Score s = score(sl, nl, sr, nr);
      if (!best || s.better_than(best_score)) {
        best_score = s;
        best = CartSplit{f, split_midpoint(column[i].first, column[i + 1].first), 0.0};
      }
    }
  }
  if (best) {
    const double dn = static_cast<double>(n);
    const double weighted = (dn - static_cast<double>(best_score.num) / static_cast<double>(best_score.den)) / dn;
    best->impurity_decrease = gini_of(total, n) - weighted;
  }
  return best;
}

TreeEnsemble train_cart(const MatrixView& X, std::span<const std::size_t> y, std::size_t num_classes,
                        const CartParams& params) {
  if (X.rows != y.size() || X.rows == 0) {
    throw Error(ErrorCode::ShapeMismatch, "CART needs X rows == labels >= 1");
  }
  for (auto label : y) {
    if (label >= num_classes) throw Error(ErrorCode::BadLabel, "label " + std::to_string(label) + " >= num_classes");
  }
  if (params.min_samples_split < 2) throw Error(ErrorCode::BadConfig, "min_samples_split must be >= 2");

  Tree tree;
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  std::vector<std::size_t> all(X.rows);
  std::iota(all.begin(), all.end(), 0);
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(all), 0});

  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto r : p.rows) ++counts[y[r]];
    TreeNode& node = tree.nodes[p.node];
    node.cover = static_cast<double>(p.rows.size());

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    std::optional<CartSplit> split;
    if (!pure && p.rows.size() >= params.min_samples_split && (params.max_depth == 0 || p.depth < params.max_depth)) {
      split = best_cart_split(X, y, num_classes, p.rows);
    }
    if (!split) {
      node.value.resize(num_classes);
      for (std::size_t k = 0; k < num_classes; ++k) {
        node.value[k] = static_cast<double>(counts[k]) / static_cast<double>(p.rows.size());
      }
      continue;
    }
    std::vector<std::size_t> lrows, rrows;
    for (auto r : p.rows) (X.at(r, split->feature) <= split->threshold ? lrows : rrows).push_back(r);
    const int l = static_cast<int>(tree.nodes.size());
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = l + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    // Right pushed first so the left subtree is expanded first.
    stack.push_back({l + 1, std::move(rrows), p.depth + 1});
    stack.push_back({l, std::move(lrows), p.depth + 1});
  }

  TreeEnsemble model;
  model.kind = ModelKind::Cart;
  model.num_features = X.cols;
  model.base_score.assign(num_classes, 0.0);
  model.trees.push_back(std::move(tree));
  model.tree_weights = {1.0};
  model.config = {{"min_samples_split", params.min_samples_split},
                  {"max_depth", params.max_depth},
                  {"criterion", "gini"},
                  {"splitter", "best"}};
  for (std::size_t k = 0; k < num_classes; ++k) model.classes.push_back(std::to_string(k));
  return model;
}

}  // namespace stylo
