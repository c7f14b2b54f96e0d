#pragma once

// Bagged CART regression trees with variance-reduction splits.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/error.hpp"

namespace emuopt {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;      // 0: unlimited
  int min_leaf = 2;
  int max_features = 2;   // features tried per split; 0 or >= d: all
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw ValidationError("forest: n_trees must be >= 1");
    if (max_depth < 0) throw ValidationError("forest: max_depth must be >= 0");
    if (min_leaf < 1) throw ValidationError("forest: min_leaf must be >= 1");
    if (max_features < 0) throw ValidationError("forest: max_features must be >= 0");
  }
  bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
public:
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }

  int depth() const { return depth_from(0); }
  std::size_t leaf_count() const {
    return std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; });
  }

  /// Grows a tree on the rows listed in `sample` (repeats allowed).
  static RegressionTree grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int> sample,
                             const ForestParams& p, std::mt19937_64& rng) {
    RegressionTree t;
    Builder b{x, y, p, rng, t.nodes};
    b.build(sample, 0, sample.size(), 0);
    return t;
  }

  bool operator==(const RegressionTree&) const = default;

private:
  int depth_from(int i) const {
    if (nodes[i].feature < 0) return 0;
    return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
  }

  struct Builder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const ForestParams& p;
    std::mt19937_64& rng;
    std::vector<TreeNode>& nodes;

    // Builds the node for sample[begin, end) and returns its index.
    int build(std::vector<int>& sample, std::size_t begin, std::size_t end, int depth) {
      const int self = static_cast<int>(nodes.size());
      nodes.emplace_back();
      const std::size_t n = end - begin;
      double sum = 0.0;
      for (std::size_t k = begin; k < end; ++k) sum += y(sample[k]);
      nodes[self].value = sum / n;

      bool pure = true;
      for (std::size_t k = begin + 1; k < end && pure; ++k) pure = y(sample[k]) == y(sample[begin]);
      const bool depth_ok = p.max_depth == 0 || depth < p.max_depth;
      if (pure || !depth_ok || n < 2 * static_cast<std::size_t>(p.min_leaf)) return self;

      const int d = static_cast<int>(x.cols());
      std::vector<int> features(d);
      std::iota(features.begin(), features.end(), 0);
      int tried = (p.max_features == 0 || p.max_features >= d) ? d : p.max_features;
      if (tried < d) {
        // Partial Fisher-Yates: the first `tried` entries are a random subset.
        for (int k = 0; k < tried; ++k) {
          std::uniform_int_distribution<int> pick(k, d - 1);
          std::swap(features[k], features[pick(rng)]);
        }
      }

      int best_feature = -1;
      double best_threshold = 0.0, best_score = -std::numeric_limits<double>::infinity();
      std::vector<int> order(sample.begin() + begin, sample.begin() + end);
      for (int fi = 0; fi < tried; ++fi) {
        const int f = features[fi];
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
        double left_sum = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
          left_sum += y(order[k]);
          const double lo = x(order[k], f), hi = x(order[k + 1], f);
          if (!(lo < hi)) continue;
          const std::size_t nl = k + 1, nr = n - nl;
          if (nl < static_cast<std::size_t>(p.min_leaf) || nr < static_cast<std::size_t>(p.min_leaf)) continue;
          const double right_sum = sum - left_sum;
          // Maximizing this is equivalent to minimizing child SSE.
          const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
          if (score > best_score) {
            best_score = score;
            best_feature = f;
            best_threshold = 0.5 * (lo + hi);
            if (best_threshold >= hi) best_threshold = lo;
          }
        }
      }
      if (best_feature < 0) return self;

      auto mid = std::stable_partition(sample.begin() + begin, sample.begin() + end,
                                       [&](int r) { return x(r, best_feature) <= best_threshold; });
      const std::size_t split_at = static_cast<std::size_t>(mid - sample.begin());
      nodes[self].feature = best_feature;
      nodes[self].threshold = best_threshold;
      const int l = build(sample, begin, split_at, depth + 1);
      const int r = build(sample, split_at, end, depth + 1);
      nodes[self].left = l;
      nodes[self].right = r;
      return self;
    }
  };
};

class RandomForest {
public:
  std::vector<RegressionTree> trees;
  int n_features = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != n_features) throw ValidationError("forest: feature dimension mismatch");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (const auto& t : trees) s += t.predict(x.row(i));
      out(i) = s / static_cast<double>(trees.size());
    }
    return out;
  }

  bool operator==(const RandomForest&) const = default;
};

inline RandomForest fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const ForestParams& params = {}) {
  params.validate();
  if (x.rows() < 2) throw ValidationError("fit_random_forest: needs at least 2 rows");
  if (x.rows() != y.size()) throw ValidationError("fit_random_forest: row count mismatch");
  RandomForest f;
  f.n_features = static_cast<int>(x.cols());
  std::mt19937_64 rng(params.seed);
  const int n = static_cast<int>(x.rows());
  std::uniform_int_distribution<int> draw(0, n - 1);
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<int> sample(n);
    if (params.bootstrap)
      for (int& s : sample) s = draw(rng);
    else
      std::iota(sample.begin(), sample.end(), 0);
    f.trees.push_back(RegressionTree::grow(x, y, std::move(sample), params, rng));
  }
  return f;
}

}  // namespace emuopt
