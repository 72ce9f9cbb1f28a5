#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dwp.hpp"
#include "forest.hpp"
#include "lss_gen.hpp"
#include "lss_spec.hpp"
#include "miner.hpp"
#include "signed_set.hpp"

namespace lss {

// |truth ∩ found| / |truth ∪ found| over sets-of-sets; two empty families score 1.
inline double jaccard_score(std::span<const SignedSet> truth, std::span<const SignedSet> found) {
  const std::set<SignedSet> a(truth.begin(), truth.end());
  const std::set<SignedSet> b(found.begin(), found.end());
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& s : a) common += b.count(s);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

// Signed feature sequence from the root to `leaf`.
inline std::vector<SignedFeature> path_to_leaf(const Tree& tree, std::size_t leaf) {
  std::vector<std::int64_t> parent(tree.nodes.size(), TreeNode::kNone);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.is_leaf()) continue;
    parent[static_cast<std::size_t>(node.left)] = static_cast<std::int64_t>(i);
    parent[static_cast<std::size_t>(node.right)] = static_cast<std::int64_t>(i);
  }
  std::vector<SignedFeature> steps;
  for (auto at = static_cast<std::int64_t>(leaf); parent[static_cast<std::size_t>(at)] != TreeNode::kNone;) {
    const auto up = parent[static_cast<std::size_t>(at)];
    const auto& node = tree.nodes[static_cast<std::size_t>(up)];
    steps.push_back({static_cast<std::size_t>(node.feature) + 1, node.left == at ? Sign::Minus : Sign::Plus});
    at = up;
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

// Population-oracle selection along a path. With F± the first-occurrence
// signed features above a node, feature k is desirable there iff some basic
// interaction S_j contains k, no feature of S_j has appeared with the sign
// opposite to S_j, and (k, sign of k in S_j) has not appeared. Returns the
// first-occurrence signed features whose feature was desirable at its node.
inline SignedSet oracle_feature_set(const LssSpec& spec, std::span<const SignedFeature> path) {
  auto report = validate_lss_spec(spec);
  if (spec.allow_overlap) report.violations.push_back("oracle set needs disjoint interactions");
  if (!report.ok()) throw ValidationError("oracle feature set: " + report.violations.front());

  std::vector<SignedFeature> first;  // F± at the current node
  std::vector<SignedFeature> desirable;
  auto first_has = [&](const SignedFeature& f) { return std::find(first.begin(), first.end(), f) != first.end(); };
  auto seen_feature = [&](std::size_t k) {
    return std::any_of(first.begin(), first.end(), [&](const SignedFeature& f) { return f.index == k; });
  };
  auto is_desirable = [&](std::size_t k) {
    for (const auto& term : spec.interactions) {
      const auto& s = term.signed_set;
      const auto own = std::find_if(s.begin(), s.end(), [&](const SignedFeature& f) { return f.index == k; });
      if (own == s.end()) continue;
      const bool opposite_seen =
          std::any_of(s.begin(), s.end(), [&](const SignedFeature& f) { return first_has({f.index, flip(f.sign)}); });
      if (!opposite_seen && !first_has(*own)) return true;
    }
    return false;
  };

  for (const auto& step : path) {
    if (seen_feature(step.index)) continue;
    if (is_desirable(step.index)) desirable.push_back(step);
    first.push_back(step);
  }
  return SignedSet(std::move(desirable));
}

struct TheoremConstants {
  double c_beta{1.0};
  double c_gamma{0.25};
  double c_m{0.25};
  std::size_t s{1};
  bool mtry_condition_met{true};
};

// Largest C_m < 1/2 with C_m p + (1 - C_m) s <= mtry <= (1 - C_m)(p - s);
// nullopt when no positive value qualifies.
inline std::optional<double> mtry_constant(std::size_t mtry, std::size_t p, std::size_t s) {
  if (p <= s) return std::nullopt;
  const double room = static_cast<double>(p - s);
  const double m = static_cast<double>(mtry);
  const double lower_side = (m - static_cast<double>(s)) / room;
  const double upper_side = 1.0 - m / room;
  const double c = std::min({lower_side, upper_side, std::nextafter(0.5, 0.0)});
  if (!(c > 0.0)) return std::nullopt;
  return c;
}

// Constants of the spec and forest settings. When the mtry condition fails,
// `c_m_fallback` (if given) is used and the failure is recorded.
inline TheoremConstants theorem_constants(const LssSpec& spec, std::size_t mtry, std::size_t p,
                                          std::optional<double> c_m_fallback = std::nullopt) {
  if (spec.interactions.empty()) throw ValidationError("spec has no interactions");
  TheoremConstants c;
  c.c_beta = std::numeric_limits<double>::infinity();
  c.c_gamma = 0.5;
  for (const auto& term : spec.interactions) {
    c.c_beta = std::min(c.c_beta, std::abs(term.beta));
    for (const auto& f : term.signed_set) {
      const double g = spec.threshold(f.index);
      c.c_gamma = std::min(c.c_gamma, std::min(g, 1.0 - g));
    }
  }
  c.c_gamma = std::min(c.c_gamma, std::nextafter(0.5, 0.0));
  c.s = spec.signal_count();
  const auto cm = mtry_constant(mtry, p, c.s);
  c.mtry_condition_met = cm.has_value();
  if (cm) {
    c.c_m = *cm;
  } else if (c_m_fallback) {
    c.c_m = *c_m_fallback;
  } else {
    c.c_m = std::numeric_limits<double>::quiet_NaN();
  }
  return c;
}

// (4 eps / (C_beta^2 C_gamma^(2s-1)))^(C_m^(2s) / log(1/C_gamma))
inline double bound_b(double epsilon, const TheoremConstants& c) {
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
  if (epsilon == 0.0) return 0.0;
  const double two_s = 2.0 * static_cast<double>(c.s);
  const double base = 4.0 * epsilon / (c.c_beta * c.c_beta * std::pow(c.c_gamma, two_s - 1.0));
  const double exponent = std::pow(c.c_m, two_s) / std::log(1.0 / c.c_gamma);
  return std::pow(base, exponent);
}

// round(p (0.5 - s / (2 (p - 2)))) clamped to [1, p].
inline std::size_t optimal_mtry(std::size_t p, std::size_t s) {
  if (p < 3) throw ValidationError("optimal mtry needs p >= 3");
  const double pd = static_cast<double>(p);
  const double m = std::round(pd * (0.5 - static_cast<double>(s) / (2.0 * (pd - 2.0))));
  return static_cast<std::size_t>(std::clamp(m, 1.0, pd));
}

// Admissible eta range (2^s b(eps), C_m^s / 2) for LSSFind's recovery guarantee.
struct EtaWindow {
  double lower{0.0};
  double upper{0.0};
  [[nodiscard]] bool satisfiable() const { return lower < upper; }
};

inline EtaWindow eta_window(double epsilon, const TheoremConstants& c) {
  const double s = static_cast<double>(c.s);
  return {std::exp2(s) * bound_b(epsilon, c), std::pow(c.c_m, s) / 2.0};
}

// Nonempty unions of multi-feature basic interactions together with either
// sign of any subset of singleton interactions.
inline std::vector<SignedSet> union_signed_interactions(const LssSpec& spec, std::size_t cap = 100000) {
  std::vector<SignedSet> multi;
  std::vector<SignedFeature> singles;
  for (const auto& term : spec.interactions) {
    if (term.signed_set.size() > 1) {
      multi.push_back(term.signed_set);
    } else if (term.signed_set.size() == 1) {
      singles.push_back(term.signed_set[0]);
    }
  }
  const double total = std::exp2(static_cast<double>(multi.size())) * std::pow(3.0, static_cast<double>(singles.size()));
  if (total > static_cast<double>(cap) || multi.size() > 30) {
    throw ValidationError("too many union signed interactions to enumerate");
  }
  std::set<SignedSet> out;
  const std::size_t n_single_choices = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(singles.size())));
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << multi.size()); ++mask) {
    for (std::size_t code = 0; code < n_single_choices; ++code) {
      SignedSet acc;
      for (std::size_t j = 0; j < multi.size(); ++j) {
        if (mask >> j & 1U) acc = acc.united(multi[j]);
      }
      std::size_t rest = code;
      for (const auto& f : singles) {
        const auto choice = rest % 3;
        rest /= 3;
        if (choice == 1) acc = acc.united(SignedSet{{f.index, Sign::Minus}});
        if (choice == 2) acc = acc.united(SignedSet{{f.index, Sign::Plus}});
      }
      if (!acc.empty()) out.insert(std::move(acc));
    }
  }
  return {out.begin(), out.end()};
}

// Sets near the basic interactions that are not union signed interactions:
// proper nonempty subsets, single sign flips, and one extra noise feature.
inline std::vector<SignedSet> default_non_interactions(const LssSpec& spec, std::size_t p) {
  const auto unions = union_signed_interactions(spec);
  const std::set<SignedSet> union_set(unions.begin(), unions.end());
  std::set<std::size_t> signal;
  for (const auto& term : spec.interactions) {
    for (const auto& f : term.signed_set) signal.insert(f.index);
  }
  std::optional<std::size_t> noise_feature;
  for (std::size_t k = 1; k <= p; ++k) {
    if (!signal.contains(k)) {
      noise_feature = k;
      break;
    }
  }
  std::set<SignedSet> out;
  for (const auto& term : spec.interactions) {
    const auto& s = term.signed_set;
    if (s.size() <= 16) {
      for (std::uint32_t mask = 1; mask + 1 < (1U << s.size()); ++mask) {
        std::vector<SignedFeature> members;
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (mask >> i & 1U) members.push_back(s[i]);
        }
        out.insert(SignedSet(std::move(members)));
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto members = s.members();
      members[i].sign = flip(members[i].sign);
      out.insert(SignedSet(std::move(members)));
    }
    if (noise_feature) {
      for (auto sign : {Sign::Minus, Sign::Plus}) out.insert(s.united(SignedSet{{*noise_feature, sign}}));
    }
  }
  std::vector<SignedSet> result;
  for (const auto& s : out) {
    if (!union_set.contains(s) && s.max_index() <= p) result.push_back(s);
  }
  return result;
}

struct BoundEntry {
  SignedSet set;
  bool union_interaction{false};
  double dwp{0.0};
  double cap{1.0};
  std::optional<double> floor;    // union interactions: cap - b(eps)
  std::optional<double> ceiling;  // other sets: cap (1 - C_m^s / 2)
  bool floor_crossed{false};
  bool ceiling_crossed{false};
};

struct BoundReport {
  TheoremConstants constants;
  double epsilon{0.0};
  double b{0.0};
  EtaWindow window;
  std::vector<BoundEntry> entries;
  std::size_t warnings{0};
};

// Thrown when a DWP exceeds 2^-|S|; that cap holds for every tree, so a
// violation means the DWP computation is broken.
class CapViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct BoundCheckOptions {
  std::vector<SignedSet> extra_queries;
  std::optional<double> c_m_fallback;
  FirstRule rule{FirstRule::StrictFirst};
  unsigned threads{1};
};

inline BoundReport check_theorem_bounds(const Forest& forest, const LssSpec& spec, double epsilon,
                                        const BoundCheckOptions& options = {}) {
  auto validation = validate_lss_spec(spec);
  if (spec.allow_overlap) validation.violations.push_back("bound check needs disjoint interactions");
  if (!validation.ok()) throw ValidationError("bound check: " + validation.violations.front());

  BoundReport report;
  report.epsilon = epsilon;
  report.constants = theorem_constants(spec, resolved_mtry(forest.config, forest.p), forest.p, options.c_m_fallback);
  const bool have_cm = !std::isnan(report.constants.c_m);
  report.b = have_cm ? bound_b(epsilon, report.constants) : std::numeric_limits<double>::quiet_NaN();
  if (have_cm) report.window = eta_window(epsilon, report.constants);

  const auto unions = union_signed_interactions(spec);
  const std::set<SignedSet> union_set(unions.begin(), unions.end());
  std::set<SignedSet> queries(unions.begin(), unions.end());
  for (const auto& s : default_non_interactions(spec, forest.p)) queries.insert(s);
  for (const auto& s : options.extra_queries) queries.insert(s);

  const auto itemsets = forest_itemsets(forest, epsilon, options.rule, options.threads);
  const double trees = static_cast<double>(forest.trees.size());
  for (const auto& s : queries) {
    BoundEntry e;
    e.set = s;
    e.union_interaction = union_set.contains(s);
    double mass = 0.0;
    std::vector<double> per_tree(forest.trees.size(), 0.0);
    for (const auto& path : itemsets) {
      if (path.items.includes(s)) per_tree[path.tree_index] += path.weight;
    }
    for (double m : per_tree) mass += m;
    e.dwp = mass / trees;
    e.cap = std::ldexp(1.0, -static_cast<int>(s.size()));
    if (e.dwp > e.cap + 1e-12) {
      throw CapViolation("DWP of " + to_string(s) + " exceeds 2^-|S|: " + std::to_string(e.dwp));
    }
    if (have_cm) {
      if (e.union_interaction) {
        e.floor = e.cap - report.b;
        e.floor_crossed = e.dwp < *e.floor;
      } else {
        e.ceiling = e.cap * (1.0 - std::pow(report.constants.c_m, static_cast<double>(report.constants.s)) / 2.0);
        e.ceiling_crossed = e.dwp > *e.ceiling;
      }
    }
    report.warnings += (e.floor_crossed || e.ceiling_crossed) ? 1 : 0;
    report.entries.push_back(std::move(e));
  }
  return report;
}

// Forest and LSSFind settings for a simulation cell. The forest defaults
// follow scikit-learn's RandomForestRegressor (all features are split
// candidates, bootstrap resampling), which is what the reference simulations
// were run with.
struct FindParams {
  double eta{0.01};
  double epsilon{0.01};
  std::size_t s_max{0};  // 0 selects L + 1
  std::size_t n_trees{100};
  std::optional<std::size_t> mtry;  // nullopt selects p
  bool bootstrap{true};
  double min_child_fraction{0.0};
  FirstRule rule{FirstRule::StrictFirst};
};

struct RunResult {
  std::size_t run_index{0};
  double score{0.0};
  std::vector<SignedSet> found;
  double seconds{0.0};
};

struct ScenarioResult {
  std::vector<RunResult> runs;
  double mean{0.0};
  double sd{0.0};
  double seconds{0.0};
};

// Called with each run's index and fitted forest, possibly concurrently.
using ForestObserver = std::function<void(std::size_t, const Forest&)>;

// Run r uses dataset seed derive_seed(scenario.seed, r) and forest seed
// derive_seed(that, 2). Runs execute on up to `threads` workers.
inline ScenarioResult run_scenario(const ScenarioConfig& scenario, std::size_t runs, const FindParams& params,
                                   unsigned threads = 1, const ForestObserver& observe = {}) {
  validate_scenario(scenario);
  ScenarioResult result;
  result.runs.resize(runs);
  const auto started = std::chrono::steady_clock::now();
  parallel_for(runs, threads, [&](std::size_t r) {
    const auto t0 = std::chrono::steady_clock::now();
    auto cell = scenario;
    cell.seed = derive_seed(scenario.seed, r);
    const auto [data, spec] = gen_dataset(cell);
    RfConfig config;
    config.n_trees = params.n_trees;
    config.mtry = params.mtry.value_or(scenario.p);
    config.epsilon = params.epsilon;
    config.bootstrap = params.bootstrap;
    config.min_child_fraction = params.min_child_fraction;
    config.seed = derive_seed(cell.seed, 2);
    LssFindParams find{params.eta, params.s_max == 0 ? scenario.L + 1 : params.s_max, params.rule, 1};
    const auto forest = fit_forest(data, config, 1);
    if (observe) observe(r, forest);
    const auto found = lssfind(forest, find);
    RunResult& out = result.runs[r];
    out.run_index = r;
    for (const auto& f : found) out.found.push_back(f.set);
    out.score = jaccard_score(spec.basic_interactions(), out.found);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (runs == 0) return result;
  double sum = 0.0;
  for (const auto& r : result.runs) sum += r.score;
  result.mean = sum / static_cast<double>(runs);
  if (runs > 1) {
    double ss = 0.0;
    for (const auto& r : result.runs) ss += (r.score - result.mean) * (r.score - result.mean);
    result.sd = std::sqrt(ss / static_cast<double>(runs - 1));
  }
  return result;
}

}  // namespace lss
