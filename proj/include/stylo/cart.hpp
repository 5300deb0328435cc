#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/model.hpp"

namespace stylo {

struct CartParams {
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;  // 0 = unlimited
};

// Midpoint that still separates a < b when the two are adjacent doubles.
double split_midpoint(double a, double b);

struct CartSplit {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

// Best Gini split of `rows` over every feature and every midpoint between
// consecutive distinct values. Ties go to the lowest feature, then the lowest
// threshold. nullopt when every feature is constant on `rows`.
std::optional<CartSplit> best_cart_split(const MatrixView& X, std::span<const std::size_t> y, std::size_t num_classes,
                                         std::span<const std::size_t> rows);

// Classification tree grown depth-first until nodes are pure, smaller than
// min_samples_split, at max_depth, or unsplittable. Leaves hold class
// frequencies; the ensemble margin is the class-probability vector.
TreeEnsemble train_cart(const MatrixView& X, std::span<const std::size_t> y, std::size_t num_classes,
                        const CartParams& params = {});

}  // namespace stylo
