#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "forest.hpp"
#include "parallel.hpp"
#include "signed_set.hpp"

namespace lss {

// Which occurrence of a feature on a path decides its sign.
//  StrictFirst:          only the feature's first split on the path counts,
//                        and only if that split's delta exceeds epsilon.
//  FirstAboveThreshold:  the first split of the feature whose delta exceeds
//                        epsilon counts.
enum class FirstRule { StrictFirst, FirstAboveThreshold };

inline std::string to_string(FirstRule r) {
  return r == FirstRule::StrictFirst ? "strict_first" : "first_above_threshold";
}

inline FirstRule parse_first_rule(const std::string& s) {
  if (s == "strict_first") return FirstRule::StrictFirst;
  if (s == "first_above_threshold") return FirstRule::FirstAboveThreshold;
  throw ValidationError("unknown first rule '" + s + "'");
}

// Signed features selected on one root-to-leaf path, with weight 2^-depth.
struct PathItemset {
  SignedSet items;
  double weight{1.0};
  std::size_t tree_index{0};
  std::size_t leaf_index{0};
};

enum class DwpMethod { Exact, Sampled };

struct DwpEstimate {
  double value{0.0};
  std::size_t n_trees{0};
  DwpMethod method{DwpMethod::Exact};
  std::optional<double> std_error;
};

namespace detail {

// Tracks the selected items along a path as it is extended one split at a time.
class PathSelector {
 public:
  PathSelector(double epsilon, FirstRule rule) : epsilon_(epsilon), rule_(rule) {}

  // Returns true when the split (feature, sign, delta) adds an item.
  [[nodiscard]] bool admits(std::size_t feature, double delta) const {
    if (!(delta > epsilon_)) return false;
    if (rule_ == FirstRule::StrictFirst) return !seen(feature, visited_);
    return !seen(feature, selected_);
  }

  void push(std::size_t feature, Sign sign, double delta) {
    const bool add = admits(feature, delta);
    visited_.push_back(feature);
    selected_.push_back(add ? feature : kNoFeature);
    if (add) items_.push_back({feature + 1, sign});
  }

  void pop() {
    if (selected_.back() != kNoFeature) items_.pop_back();
    selected_.pop_back();
    visited_.pop_back();
  }

  [[nodiscard]] SignedSet items() const { return SignedSet(items_); }

 private:
  static constexpr std::size_t kNoFeature = static_cast<std::size_t>(-1);

  static bool seen(std::size_t feature, const std::vector<std::size_t>& list) {
    for (auto f : list) {
      if (f == feature) return true;
    }
    return false;
  }

  double epsilon_;
  FirstRule rule_;
  std::vector<std::size_t> visited_;
  std::vector<std::size_t> selected_;
  std::vector<SignedFeature> items_;
};

}  // namespace detail

inline double path_weight(std::size_t depth) { return std::ldexp(1.0, -static_cast<int>(depth)); }

// One itemset per leaf, in depth-first (left before right) order.
inline std::vector<PathItemset> path_itemsets(const Tree& tree, double epsilon,
                                              FirstRule rule = FirstRule::StrictFirst, std::size_t tree_index = 0) {
  std::vector<PathItemset> out;
  if (tree.nodes.empty()) return out;
  detail::PathSelector selector(epsilon, rule);

  // Enter frames extend the path by the edge into `node` (none for the
  // root); exit frames undo that extension.
  struct Frame {
    std::size_t node;
    bool enter;
    bool has_edge;
    std::size_t feature;
    Sign sign;
    double delta;
  };
  std::vector<Frame> stack{{0, true, false, 0, Sign::Minus, 0.0}};
  while (!stack.empty()) {
    const auto frame = stack.back();
    stack.pop_back();
    if (!frame.enter) {
      selector.pop();
      continue;
    }
    if (frame.has_edge) selector.push(frame.feature, frame.sign, frame.delta);
    const auto& node = tree.nodes[frame.node];
    if (node.is_leaf()) {
      out.push_back({selector.items(), path_weight(node.depth), tree_index, frame.node});
      continue;
    }
    const auto feature = static_cast<std::size_t>(node.feature);
    stack.push_back({0, false, false, 0, Sign::Minus, 0.0});
    stack.push_back({static_cast<std::size_t>(node.right), true, true, feature, Sign::Plus, node.delta});
    stack.push_back({0, false, false, 0, Sign::Minus, 0.0});
    stack.push_back({static_cast<std::size_t>(node.left), true, true, feature, Sign::Minus, node.delta});
  }
  return out;
}

inline std::vector<PathItemset> forest_itemsets(const Forest& forest, double epsilon,
                                                FirstRule rule = FirstRule::StrictFirst, unsigned threads = 1) {
  std::vector<std::vector<PathItemset>> per_tree(forest.trees.size());
  parallel_for(forest.trees.size(), threads,
               [&](std::size_t t) { per_tree[t] = path_itemsets(forest.trees[t], epsilon, rule, t); });
  std::vector<PathItemset> out;
  for (auto& part : per_tree) {
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

namespace detail {

inline void check_query(const Forest& forest, const SignedSet& s) {
  if (forest.trees.empty()) throw ValidationError("forest has no trees");
  if (s.max_index() > forest.p) {
    throw ValidationError("set references feature " + std::to_string(s.max_index()) + " but the forest has p = " +
                          std::to_string(forest.p));
  }
}

}  // namespace detail

// Exact DWP of `s`: mean over trees of the 2^-depth mass of leaves whose
// itemset contains `s`. Per-tree sums are reduced in tree order.
inline DwpEstimate dwp_exact(const Forest& forest, const SignedSet& s, double epsilon,
                             FirstRule rule = FirstRule::StrictFirst, unsigned threads = 1) {
  detail::check_query(forest, s);
  std::vector<double> per_tree(forest.trees.size(), 0.0);
  parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
    double mass = 0.0;
    for (const auto& path : path_itemsets(forest.trees[t], epsilon, rule, t)) {
      if (path.items.includes(s)) mass += path.weight;
    }
    per_tree[t] = mass;
  });
  double total = 0.0;
  for (double m : per_tree) total += m;
  return {total / static_cast<double>(forest.trees.size()), forest.trees.size(), DwpMethod::Exact, std::nullopt};
}

// Monte-Carlo DWP: uniform tree, fair coin at every split.
inline DwpEstimate dwp_sample(const Forest& forest, const SignedSet& s, double epsilon, std::size_t n_paths,
                              std::uint64_t seed, FirstRule rule = FirstRule::StrictFirst) {
  detail::check_query(forest, s);
  if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_tree(0, forest.trees.size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    const auto& tree = forest.trees[pick_tree(rng)];
    detail::PathSelector selector(epsilon, rule);
    std::size_t at = 0;
    while (!tree.nodes[at].is_leaf()) {
      const auto& node = tree.nodes[at];
      const bool left = coin(rng);
      selector.push(static_cast<std::size_t>(node.feature), left ? Sign::Minus : Sign::Plus, node.delta);
      at = static_cast<std::size_t>(left ? node.left : node.right);
    }
    if (selector.items().includes(s)) ++hits;
  }
  const double n = static_cast<double>(n_paths);
  const double value = static_cast<double>(hits) / n;
  return {value, forest.trees.size(), DwpMethod::Sampled, std::sqrt(value * (1.0 - value) / n)};
}

}  // namespace lss
