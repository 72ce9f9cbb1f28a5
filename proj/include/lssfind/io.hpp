#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "eval.hpp"
#include "forest.hpp"
#include "lss_gen.hpp"
#include "lss_spec.hpp"
#include "miner.hpp"
#include "signed_set.hpp"

namespace lss::io {

using json = nlohmann::json;

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace detail {

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw ValidationError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback, const std::string& where) {
  return j.contains(name) ? field<T>(j, name, where) : fallback;
}

inline double number_or_inf(const json& j, const char* name, double fallback, const std::string& where) {
  if (!j.contains(name)) return fallback;
  const auto& v = j.at(name);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ValidationError(where + ": field '" + name + "' must be a number or \"inf\"");
  }
  if (!v.is_number()) throw ValidationError(where + ": field '" + name + "' must be a number");
  return v.get<double>();
}

inline json nullable(double v, bool present) { return present ? json(v) : json(nullptr); }

}  // namespace detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
  }
}

// ---- LssSpec ---------------------------------------------------------------

inline json to_json(const LssSpec& spec) {
  json interactions = json::array();
  for (const auto& term : spec.interactions) {
    interactions.push_back({{"set", to_string(term.signed_set)}, {"beta", term.beta}});
  }
  json thresholds = json::object();
  for (const auto& [k, g] : spec.thresholds) thresholds[std::to_string(k)] = g;
  return {{"intercept", spec.intercept},
          {"interactions", interactions},
          {"thresholds", thresholds},
          {"noise", {{"family", to_string(spec.noise.family)}, {"scale", spec.noise.scale}}},
          {"correlation_alpha", spec.correlation_alpha},
          {"allow_overlap", spec.allow_overlap}};
}

inline LssSpec spec_from_json(const json& j) {
  const std::string where = "spec";
  if (!j.is_object()) throw ValidationError("spec: expected a JSON object");
  LssSpec spec;
  spec.intercept = detail::field_or<double>(j, "intercept", 0.0, where);
  const auto terms = detail::field<json>(j, "interactions", where);
  if (!terms.is_array()) throw ValidationError("spec: field 'interactions' must be an array");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string at = "spec.interactions[" + std::to_string(i) + "]";
    spec.interactions.push_back(
        {parse_signed_set(detail::field<std::string>(terms[i], "set", at)), detail::field<double>(terms[i], "beta", at)});
  }
  const auto thresholds = detail::field<json>(j, "thresholds", where);
  if (!thresholds.is_object()) throw ValidationError("spec: field 'thresholds' must be an object");
  for (const auto& [key, value] : thresholds.items()) {
    std::size_t k = 0;
    const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
    if (ec != std::errc{} || end != key.data() + key.size() || k < 1) {
      throw ValidationError("spec.thresholds: key '" + key + "' is not a 1-based feature index");
    }
    if (!value.is_number()) throw ValidationError("spec.thresholds: value for '" + key + "' must be a number");
    spec.thresholds[k] = value.get<double>();
  }
  if (j.contains("noise")) {
    const auto& noise = j.at("noise");
    spec.noise.family = parse_noise_family(detail::field_or<std::string>(noise, "family", "gaussian", "spec.noise"));
    spec.noise.scale = detail::field_or<double>(noise, "scale", 0.0, "spec.noise");
  }
  spec.correlation_alpha = detail::field_or<double>(j, "correlation_alpha", 0.0, where);
  spec.allow_overlap = detail::field_or<bool>(j, "allow_overlap", false, where);
  return spec;
}

// ---- ScenarioConfig --------------------------------------------------------

inline json to_json(const ScenarioConfig& c) {
  return {{"K", c.K},
          {"L", c.L},
          {"n", c.n},
          {"p", c.p},
          {"snr", std::isinf(c.snr) ? json("inf") : json(c.snr)},
          {"noise_family", to_string(c.noise_family)},
          {"correlation_alpha", c.correlation_alpha},
          {"overlap", c.overlap},
          {"coverage", c.coverage},
          {"seed", c.seed}};
}

inline ScenarioConfig scenario_from_json(const json& j) {
  const std::string where = "scenario";
  if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
  ScenarioConfig c;
  c.K = detail::field<std::size_t>(j, "K", where);
  c.L = detail::field<std::size_t>(j, "L", where);
  c.n = detail::field_or<std::size_t>(j, "n", c.n, where);
  c.p = detail::field_or<std::size_t>(j, "p", c.p, where);
  c.snr = detail::number_or_inf(j, "snr", c.snr, where);
  c.noise_family = parse_noise_family(detail::field_or<std::string>(j, "noise_family", "gaussian", where));
  c.correlation_alpha = detail::field_or<double>(j, "correlation_alpha", 0.0, where);
  c.overlap = detail::field_or<std::size_t>(j, "overlap", 0, where);
  c.coverage = detail::field_or<double>(j, "coverage", 0.5, where);
  c.seed = detail::field_or<std::uint64_t>(j, "seed", 0, where);
  validate_scenario(c);
  return c;
}

// ---- Forest ----------------------------------------------------------------

inline json to_json(const RfConfig& c) {
  return {{"n_trees", c.n_trees},
          {"mtry", c.mtry},
          {"epsilon", c.epsilon},
          {"min_child_samples", c.min_child_samples},
          {"bootstrap", c.bootstrap},
          {"min_child_fraction", c.min_child_fraction},
          {"seed", c.seed}};
}

inline RfConfig config_from_json(const json& j) {
  const std::string where = "config";
  RfConfig c;
  c.n_trees = detail::field<std::size_t>(j, "n_trees", where);
  c.mtry = detail::field<std::size_t>(j, "mtry", where);
  c.epsilon = detail::field<double>(j, "epsilon", where);
  c.min_child_samples = detail::field_or<std::size_t>(j, "min_child_samples", 1, where);
  c.bootstrap = detail::field_or<bool>(j, "bootstrap", false, where);
  c.min_child_fraction = detail::field_or<double>(j, "min_child_fraction", 0.0, where);
  c.seed = detail::field_or<std::uint64_t>(j, "seed", 0, where);
  return c;
}

inline json to_json(const Forest& forest) {
  json trees = json::array();
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    json nodes = json::array();
    for (const auto& node : forest.trees[t].nodes) {
      const bool internal = !node.is_leaf();
      nodes.push_back({{"feature", internal ? json(node.feature + 1) : json(nullptr)},
                       {"threshold", detail::nullable(node.threshold, internal)},
                       {"delta", detail::nullable(node.delta, internal)},
                       {"n", node.n},
                       {"left", internal ? json(node.left) : json(nullptr)},
                       {"right", internal ? json(node.right) : json(nullptr)},
                       {"value", detail::nullable(node.value, !internal)},
                       {"depth", node.depth}});
    }
    json tree = {{"nodes", nodes}};
    if (t < forest.tree_seeds.size()) tree["seed"] = forest.tree_seeds[t];
    trees.push_back(std::move(tree));
  }
  return {{"p", forest.p}, {"config", to_json(forest.config)}, {"trees", trees}};
}

inline Forest forest_from_json(const json& j) {
  const std::string where = "forest";
  if (!j.is_object()) throw ValidationError("forest: expected a JSON object");
  Forest forest;
  forest.p = detail::field<std::size_t>(j, "p", where);
  forest.config = config_from_json(detail::field<json>(j, "config", where));
  const auto trees = detail::field<json>(j, "trees", where);
  if (!trees.is_array() || trees.empty()) throw ValidationError("forest: field 'trees' must be a nonempty array");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string at = "forest.trees[" + std::to_string(t) + "]";
    Tree tree;
    const auto nodes = detail::field<json>(trees[t], "nodes", at);
    if (!nodes.is_array() || nodes.empty()) throw ValidationError(at + ": field 'nodes' must be a nonempty array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nj = nodes[i];
      const std::string nat = at + ".nodes[" + std::to_string(i) + "]";
      TreeNode node;
      node.n = detail::field<std::size_t>(nj, "n", nat);
      node.depth = detail::field<std::size_t>(nj, "depth", nat);
      if (nj.contains("feature") && !nj.at("feature").is_null()) {
        const auto feature = detail::field<std::int64_t>(nj, "feature", nat);
        if (feature < 1 || static_cast<std::size_t>(feature) > forest.p) {
          throw ValidationError(nat + ": feature out of range");
        }
        node.feature = feature - 1;
        node.threshold = detail::field<double>(nj, "threshold", nat);
        node.delta = detail::field<double>(nj, "delta", nat);
        node.left = detail::field<std::int64_t>(nj, "left", nat);
        node.right = detail::field<std::int64_t>(nj, "right", nat);
        const auto count = static_cast<std::int64_t>(nodes.size());
        if (node.left <= static_cast<std::int64_t>(i) || node.right <= static_cast<std::int64_t>(i) ||
            node.left >= count || node.right >= count) {
          throw ValidationError(nat + ": child index out of range");
        }
      } else {
        node.value = detail::field<double>(nj, "value", nat);
      }
      tree.nodes.push_back(node);
    }
    forest.trees.push_back(std::move(tree));
    if (trees[t].contains("seed")) forest.tree_seeds.push_back(detail::field<std::uint64_t>(trees[t], "seed", at));
  }
  return forest;
}

// ---- Reports ---------------------------------------------------------------

inline json to_json(const FrequentSet& f) {
  return {{"set", to_string(f.set)}, {"support", f.support}, {"scaled", f.scaled()}};
}

inline json to_json(const std::vector<FrequentSet>& sets) {
  json out = json::array();
  for (const auto& f : sets) out.push_back(to_json(f));
  return out;
}

inline json to_json(const BoundReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"set", to_string(e.set)},
                       {"union_interaction", e.union_interaction},
                       {"dwp", e.dwp},
                       {"cap", e.cap},
                       {"floor", opt(e.floor)},
                       {"ceiling", opt(e.ceiling)},
                       {"cap_ok", true},
                       {"floor_crossed", e.floor_crossed},
                       {"ceiling_crossed", e.ceiling_crossed}});
  }
  return {{"epsilon", r.epsilon},
          {"constants",
           {{"c_beta", r.constants.c_beta},
            {"c_gamma", r.constants.c_gamma},
            {"c_m", num(r.constants.c_m)},
            {"s", r.constants.s},
            {"mtry_condition_met", r.constants.mtry_condition_met}}},
          {"b", num(r.b)},
          {"eta_window",
           {{"lower", num(r.window.lower)}, {"upper", num(r.window.upper)}, {"satisfiable", r.window.satisfiable()}}},
          {"warnings", r.warnings},
          {"entries", entries}};
}

// ---- Dataset CSV -----------------------------------------------------------

inline void write_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t k = 0; k < data.p(); ++k) out << 'x' << (k + 1) << ',';
  out << "y\n";
  const auto y = data.y();
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t k = 0; k < data.p(); ++k) out << format_double(data.x(i, k)) << ',';
    out << format_double(y[i]) << '\n';
  }
}

namespace detail {

// Splits one CSV record (RFC 4180 quoting; no embedded newlines).
inline std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("line " + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_number(const std::string& text, std::size_t line_no, std::size_t column) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw ValidationError("line " + std::to_string(line_no) + ", column " + std::to_string(column) +
                          ": not a number '" + text + "'");
  }
  return v;
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line.empty()) throw ValidationError("line 1: empty CSV (expected header x1,...,xp,y)");
  const auto header = detail::split_record(line, line_no);
  if (header.size() < 2 || header.back() != "y") throw ValidationError("line 1: header must be x1,...,xp,y");
  const std::size_t p = header.size() - 1;
  for (std::size_t k = 0; k < p; ++k) {
    if (header[k] != "x" + std::to_string(k + 1)) {
      throw ValidationError("line 1: column " + std::to_string(k + 1) + " must be named x" + std::to_string(k + 1));
    }
  }
  std::vector<std::vector<double>> cols(p);
  std::vector<double> y;
  while (next_line()) {
    if (line.empty()) continue;
    const auto fields = detail::split_record(line, line_no);
    if (fields.size() != p + 1) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(p + 1) +
                            " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < p; ++k) cols[k].push_back(detail::parse_number(fields[k], line_no, k + 1));
    y.push_back(detail::parse_number(fields[p], line_no, p + 1));
  }
  return Dataset(std::move(cols), std::move(y));
}

inline Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_csv(in);
}

}  // namespace lss::io
