#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "parallel.hpp"
#include "signed_set.hpp"

namespace lss {

struct RfConfig {
  std::size_t n_trees{100};
  std::size_t mtry{0};  // 0 selects ceil(p/2)
  double epsilon{0.01};
  std::size_t min_child_samples{1};
  bool bootstrap{false};
  double min_child_fraction{0.0};
  std::uint64_t seed{0};

  friend bool operator==(const RfConfig&, const RfConfig&) = default;
};

inline std::size_t default_mtry(std::size_t p) { return (p + 1) / 2; }

inline std::size_t resolved_mtry(const RfConfig& c, std::size_t p) { return c.mtry == 0 ? default_mtry(p) : c.mtry; }

inline void validate_config(const RfConfig& c, std::size_t p) {
  if (c.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  const auto m = resolved_mtry(c, p);
  if (m < 1 || m > p) throw ValidationError("mtry must lie in [1, p]");
  if (!(c.epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
  if (c.min_child_samples < 1) throw ValidationError("min_child_samples must be >= 1");
  if (!(c.min_child_fraction >= 0.0 && c.min_child_fraction < 0.5)) {
    throw ValidationError("min_child_fraction must lie in [0, 0.5)");
  }
}

// Winning split of a node. Left child takes x[feature] <= threshold.
struct SplitRecord {
  std::size_t feature{0};  // 0-based column
  double threshold{0.0};
  double delta{0.0};
  std::size_t n_node{0};
  std::size_t n_left{0};
  std::size_t n_right{0};

  friend bool operator==(const SplitRecord&, const SplitRecord&) = default;
};

// Flat node; leaves have no children.
struct TreeNode {
  static constexpr std::int64_t kNone = -1;

  std::int64_t feature{kNone};  // 0-based column, kNone for leaves
  double threshold{0.0};
  double delta{0.0};
  std::size_t n{0};
  std::int64_t left{kNone};
  std::int64_t right{kNone};
  double value{0.0};
  std::size_t depth{0};

  [[nodiscard]] bool is_leaf() const noexcept { return feature == kNone; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Node 0 is the root; children always have larger indices than parents.
struct Tree {
  std::vector<TreeNode> nodes;

  [[nodiscard]] std::size_t leaf_for(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const auto& node = nodes[at];
      at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                              : node.right);
    }
    return at;
  }

  [[nodiscard]] std::size_t leaf_for(const Dataset& data, std::size_t row) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const auto& node = nodes[at];
      const double v = data.x(row, static_cast<std::size_t>(node.feature));
      at = static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
    }
    return at;
  }

  [[nodiscard]] std::vector<std::size_t> leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_leaf()) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
  std::vector<Tree> trees;
  RfConfig config;
  std::size_t p{0};
  std::vector<std::uint64_t> tree_seeds;

  friend bool operator==(const Forest&, const Forest&) = default;
};

// N_l N_r / (n_total (N_l + N_r)) * (mean_l - mean_r)^2
inline double impurity_decrease(std::span<const double> y_left, std::span<const double> y_right, std::size_t n_total) {
  if (y_left.empty() || y_right.empty()) throw ValidationError("impurity decrease needs two nonempty children");
  const double nl = static_cast<double>(y_left.size());
  const double nr = static_cast<double>(y_right.size());
  const double ml = std::accumulate(y_left.begin(), y_left.end(), 0.0) / nl;
  const double mr = std::accumulate(y_right.begin(), y_right.end(), 0.0) / nr;
  const double diff = ml - mr;
  return nl * nr / (static_cast<double>(n_total) * (nl + nr)) * diff * diff;
}

struct SplitConstraints {
  std::size_t n_total{1};  // sample count of the whole training set
  std::size_t min_child_samples{1};
  double min_child_fraction{0.0};

  [[nodiscard]] bool admits(std::size_t n_left, std::size_t n_right) const {
    const std::size_t n_node = n_left + n_right;
    if (n_left < min_child_samples || n_right < min_child_samples) return false;
    if (min_child_fraction > 0.0) {
      const double floor = min_child_fraction * static_cast<double>(n_node);
      if (static_cast<double>(n_left) < floor || static_cast<double>(n_right) < floor) return false;
    }
    return true;
  }
};

inline double split_threshold(double below, double above) {
  const double mid = below + (above - below) / 2.0;
  return mid < above ? mid : below;
}

// Exhaustive CART search over the candidate columns and every midpoint
// between consecutive distinct values. Ties go to the smallest feature,
// then the smallest threshold; deltas within kTieTolerance (relative) tie. Empty when no admissible split exists or
// the node is pure.
inline constexpr double kTieTolerance = 1e-12;

inline std::optional<SplitRecord> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                             std::span<const std::size_t> candidates, const SplitConstraints& limits) {
  const std::size_t count = rows.size();
  if (count < 2) return std::nullopt;
  const auto y = data.y();
  const double first = y[rows[0]];
  if (std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y[r] == first; })) return std::nullopt;

  std::vector<std::size_t> features(candidates.begin(), candidates.end());
  std::sort(features.begin(), features.end());

  std::optional<SplitRecord> best;
  std::vector<std::pair<double, double>> sorted(count);
  std::vector<double> prefix(count + 1);
  const double n_node = static_cast<double>(count);
  const double n_total = static_cast<double>(limits.n_total);
  for (const auto k : features) {
    const auto col = data.column(k);
    for (std::size_t i = 0; i < count; ++i) sorted[i] = {col[rows[i]], y[rows[i]]};
    std::sort(sorted.begin(), sorted.end());
    prefix[0] = 0.0;
    for (std::size_t i = 0; i < count; ++i) prefix[i + 1] = prefix[i] + sorted[i].second;
    const double total = prefix[count];
    for (std::size_t i = 1; i < count; ++i) {
      if (!(sorted[i - 1].first < sorted[i].first)) continue;
      if (!limits.admits(i, count - i)) continue;
      const double nl = static_cast<double>(i);
      const double nr = n_node - nl;
      const double diff = prefix[i] / nl - (total - prefix[i]) / nr;
      const double delta = nl * nr / (n_total * n_node) * diff * diff;
      if (!best || delta > best->delta * (1.0 + kTieTolerance)) {
        best = SplitRecord{k, split_threshold(sorted[i - 1].first, sorted[i].first), delta, count, i, count - i};
      }
    }
  }
  return best;
}

// Grows one tree to purity: at each node draw `mtry` candidate columns
// without replacement from the tree's own stream, then split on the best.
inline Tree fit_tree(const Dataset& data, const RfConfig& config, std::uint64_t tree_seed) {
  const std::size_t p = data.p();
  const std::size_t mtry = resolved_mtry(config, p);
  std::mt19937_64 rng(tree_seed);

  std::vector<std::size_t> rows(data.n());
  if (config.bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, data.n() == 0 ? 0 : data.n() - 1);
    for (auto& r : rows) r = pick(rng);
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  const SplitConstraints limits{std::max<std::size_t>(1, rows.size()), config.min_child_samples,
                                config.min_child_fraction};

  struct Pending {
    std::size_t node;
    std::size_t begin;
    std::size_t end;
  };
  Tree tree;
  tree.nodes.push_back(TreeNode{.n = rows.size(), .depth = 0});
  std::vector<Pending> stack{{0, 0, rows.size()}};
  std::vector<std::size_t> pool(p);
  const auto y = data.y();

  while (!stack.empty()) {
    const auto [id, begin, end] = stack.back();
    stack.pop_back();
    const std::span<std::size_t> node_rows(rows.data() + begin, end - begin);

    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    const auto split = best_split(data, node_rows, std::span<const std::size_t>(pool.data(), mtry), limits);

    if (!split) {
      double sum = 0.0;
      for (auto r : node_rows) sum += y[r];
      tree.nodes[id].value = node_rows.empty() ? 0.0 : sum / static_cast<double>(node_rows.size());
      continue;
    }

    const auto col = data.column(split->feature);
    const auto mid = std::stable_partition(node_rows.begin(), node_rows.end(),
                                           [&](std::size_t r) { return col[r] <= split->threshold; });
    const auto n_left = static_cast<std::size_t>(mid - node_rows.begin());

    const auto depth = tree.nodes[id].depth + 1;
    const auto left = static_cast<std::int64_t>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{.n = n_left, .depth = depth});
    tree.nodes.push_back(TreeNode{.n = node_rows.size() - n_left, .depth = depth});
    auto& node = tree.nodes[id];
    node.feature = static_cast<std::int64_t>(split->feature);
    node.threshold = split->threshold;
    node.delta = split->delta;
    node.left = left;
    node.right = left + 1;

    // Left subtree is processed first.
    stack.push_back({static_cast<std::size_t>(left + 1), begin + n_left, end});
    stack.push_back({static_cast<std::size_t>(left), begin, begin + n_left});
  }
  return tree;
}

// Tree i uses seed derive_seed(config.seed, i); the result does not depend
// on `threads`.
inline Forest fit_forest(const Dataset& data, const RfConfig& config, unsigned threads = 1) {
  validate_config(config, data.p());
  Forest forest;
  forest.config = config;
  forest.config.mtry = resolved_mtry(config, data.p());
  forest.p = data.p();
  forest.trees.resize(config.n_trees);
  forest.tree_seeds.resize(config.n_trees);
  for (std::size_t i = 0; i < config.n_trees; ++i) forest.tree_seeds[i] = derive_seed(config.seed, i);
  parallel_for(config.n_trees, threads,
               [&](std::size_t i) { forest.trees[i] = fit_tree(data, config, forest.tree_seeds[i]); });
  return forest;
}

}  // namespace lss
