#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "dwp.hpp"
#include "forest.hpp"
#include "signed_set.hpp"

namespace lss {

struct Transaction {
  SignedSet items;
  double weight{0.0};
};

struct FrequentSet {
  SignedSet set;
  double support{0.0};

  [[nodiscard]] std::size_t size() const noexcept { return set.size(); }
  // 2^|S| * support, the quantity LSSFind thresholds at 1 - eta.
  [[nodiscard]] double scaled() const { return std::ldexp(support, static_cast<int>(set.size())); }
};

// Path itemsets as transactions whose weights sum to 1 over the forest, so
// that a set's weighted support equals its DWP.
inline std::vector<Transaction> to_transactions(std::span<const PathItemset> itemsets, std::size_t n_trees) {
  if (n_trees == 0) throw ValidationError("n_trees must be >= 1");
  std::vector<Transaction> out;
  out.reserve(itemsets.size());
  for (const auto& path : itemsets) out.push_back({path.items, path.weight / static_cast<double>(n_trees)});
  return out;
}

// Descending support, then ascending size, then lexicographic.
inline void sort_report_order(std::vector<FrequentSet>& sets) {
  std::sort(sets.begin(), sets.end(), [](const FrequentSet& a, const FrequentSet& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.size() != b.size()) return a.size() < b.size();
    return a.set < b.set;
  });
}

namespace detail {

using ItemCode = std::uint32_t;

inline ItemCode encode(const SignedFeature& f) {
  return static_cast<ItemCode>(f.index << 1U) | (f.sign == Sign::Plus ? 1U : 0U);
}

inline SignedFeature decode(ItemCode code) {
  return {static_cast<std::size_t>(code >> 1U), (code & 1U) ? Sign::Plus : Sign::Minus};
}

struct CodedTransaction {
  std::vector<ItemCode> items;
  double weight;
};

// FP-tree over weighted transactions. Items below `min_support` are dropped;
// the rest are ranked by descending weighted support, ties by item code.
class FpTree {
 public:
  struct HeaderEntry {
    ItemCode item;
    double support;
    std::int32_t head;  // first node of this item's node-link chain
  };

  FpTree(const std::vector<CodedTransaction>& transactions, double min_support) {
    std::map<ItemCode, double> support;
    for (const auto& t : transactions) {
      for (auto item : t.items) support[item] += t.weight;
    }
    for (const auto& [item, w] : support) {
      if (w >= min_support) header_.push_back({item, w, -1});
    }
    std::sort(header_.begin(), header_.end(), [](const HeaderEntry& a, const HeaderEntry& b) {
      if (a.support != b.support) return a.support > b.support;
      return a.item < b.item;
    });
    std::map<ItemCode, std::size_t> rank;
    for (std::size_t r = 0; r < header_.size(); ++r) rank[header_[r].item] = r;
    tails_.assign(header_.size(), -1);

    nodes_.push_back({0, 0.0, -1, -1, {}});
    std::vector<std::size_t> ranked;
    for (const auto& t : transactions) {
      ranked.clear();
      for (auto item : t.items) {
        if (auto it = rank.find(item); it != rank.end()) ranked.push_back(it->second);
      }
      if (ranked.empty()) continue;
      std::sort(ranked.begin(), ranked.end());
      insert(ranked, t.weight);
    }
  }

  [[nodiscard]] const std::vector<HeaderEntry>& header() const noexcept { return header_; }

  // Prefix paths of every node carrying header entry `r`, weighted by that node.
  [[nodiscard]] std::vector<CodedTransaction> conditional_base(std::size_t r) const {
    std::vector<CodedTransaction> base;
    for (auto at = header_[r].head; at != -1; at = nodes_[static_cast<std::size_t>(at)].next) {
      const auto& node = nodes_[static_cast<std::size_t>(at)];
      CodedTransaction path{{}, node.weight};
      for (auto up = node.parent; up > 0; up = nodes_[static_cast<std::size_t>(up)].parent) {
        path.items.push_back(header_[nodes_[static_cast<std::size_t>(up)].rank].item);
      }
      if (!path.items.empty()) base.push_back(std::move(path));
    }
    return base;
  }

 private:
  struct Node {
    std::size_t rank;
    double weight;
    std::int32_t parent;
    std::int32_t next;
    std::vector<std::int32_t> children;
  };

  void insert(const std::vector<std::size_t>& ranked, double weight) {
    std::int32_t at = 0;
    for (auto r : ranked) {
      std::int32_t child = -1;
      for (auto c : nodes_[static_cast<std::size_t>(at)].children) {
        if (nodes_[static_cast<std::size_t>(c)].rank == r) {
          child = c;
          break;
        }
      }
      if (child == -1) {
        child = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({r, 0.0, at, -1, {}});
        nodes_[static_cast<std::size_t>(at)].children.push_back(child);
        if (tails_[r] == -1) {
          header_[r].head = child;
        } else {
          nodes_[static_cast<std::size_t>(tails_[r])].next = child;
        }
        tails_[r] = child;
      }
      nodes_[static_cast<std::size_t>(child)].weight += weight;
      at = child;
    }
  }

  std::vector<HeaderEntry> header_;
  std::vector<std::int32_t> tails_;
  std::vector<Node> nodes_;
};

inline void fp_growth(const FpTree& tree, std::vector<ItemCode>& prefix, double min_support, std::size_t s_max,
                      std::vector<FrequentSet>& out) {
  const auto& header = tree.header();
  for (std::size_t r = header.size(); r-- > 0;) {
    prefix.push_back(header[r].item);
    std::vector<SignedFeature> members;
    for (auto code : prefix) members.push_back(decode(code));
    out.push_back({SignedSet(std::move(members)), header[r].support});
    if (prefix.size() < s_max) {
      const FpTree conditional(tree.conditional_base(r), min_support);
      if (!conditional.header().empty()) fp_growth(conditional, prefix, min_support, s_max, out);
    }
    prefix.pop_back();
  }
}

}  // namespace detail

// All signed sets with size <= s_max and weighted support >= min_support,
// by weighted FP-growth. Output in report order.
inline std::vector<FrequentSet> mine_frequent(std::span<const Transaction> transactions, double min_support,
                                              std::size_t s_max) {
  if (!(min_support > 0.0)) throw ValidationError("min_support must be > 0");
  std::vector<FrequentSet> out;
  if (s_max == 0) return out;
  std::vector<detail::CodedTransaction> coded;
  coded.reserve(transactions.size());
  for (const auto& t : transactions) {
    detail::CodedTransaction c{{}, t.weight};
    for (const auto& f : t.items) c.items.push_back(detail::encode(f));
    coded.push_back(std::move(c));
  }
  const detail::FpTree tree(coded, min_support);
  std::vector<detail::ItemCode> prefix;
  detail::fp_growth(tree, prefix, min_support, s_max, out);
  sort_report_order(out);
  return out;
}

// Exhaustive reference for mine_frequent on small instances.
inline std::vector<FrequentSet> brute_force_frequent(std::span<const Transaction> transactions, double min_support,
                                                     std::size_t s_max) {
  std::vector<SignedFeature> universe;
  for (const auto& t : transactions) universe.insert(universe.end(), t.items.begin(), t.items.end());
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  if (universe.size() > 12) throw ValidationError("brute-force oracle supports at most 12 distinct items");

  std::vector<FrequentSet> out;
  const std::uint32_t limit = 1U << universe.size();
  for (std::uint32_t mask = 1; mask < limit; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > s_max) continue;
    std::vector<SignedFeature> members;
    for (std::size_t i = 0; i < universe.size(); ++i) {
      if (mask >> i & 1U) members.push_back(universe[i]);
    }
    SignedSet candidate(std::move(members));
    if (!candidate.sign_consistent()) continue;
    double support = 0.0;
    for (const auto& t : transactions) {
      if (t.items.includes(candidate)) support += t.weight;
    }
    if (support >= min_support && support > 0.0) out.push_back({std::move(candidate), support});
  }
  sort_report_order(out);
  return out;
}

// Members not strictly contained in another member. Duplicates collapse.
inline std::vector<FrequentSet> maximal_sets(std::span<const FrequentSet> results) {
  std::vector<FrequentSet> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < results.size() && !dominated; ++j) {
      const auto& a = results[i].set;
      const auto& b = results[j].set;
      dominated = b.size() > a.size() && b.includes(a);
    }
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const FrequentSet& f) { return f.set == results[i].set; });
    if (!dominated && !duplicate) out.push_back(results[i]);
  }
  sort_report_order(out);
  return out;
}

struct LssFindParams {
  double eta{0.01};
  std::size_t s_max{3};
  FirstRule rule{FirstRule::StrictFirst};
  unsigned threads{1};
};

// Sets with |S| <= s_max and 2^|S| DWP(S) >= 1 - eta on a trained forest.
inline std::vector<FrequentSet> lssfind(const Forest& forest, const LssFindParams& params) {
  if (!(params.eta > 0.0 && params.eta < 1.0)) throw ValidationError("eta must lie in (0,1)");
  if (params.s_max < 1) throw ValidationError("s_max must be >= 1");
  if (forest.trees.empty()) throw ValidationError("forest has no trees");
  const auto itemsets = forest_itemsets(forest, forest.config.epsilon, params.rule, params.threads);
  const auto transactions = to_transactions(itemsets, forest.trees.size());
  const double min_support = std::ldexp(1.0 - params.eta, -static_cast<int>(params.s_max));
  auto mined = mine_frequent(transactions, min_support, params.s_max);
  std::erase_if(mined, [&](const FrequentSet& f) { return f.scaled() < 1.0 - params.eta; });
  return mined;
}

inline std::vector<FrequentSet> lssfind(const Dataset& data, const RfConfig& config, const LssFindParams& params) {
  return lssfind(fit_forest(data, config, params.threads), params);
}

}  // namespace lss
