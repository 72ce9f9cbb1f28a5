// lssfind command-line driver: gen, fit, dwp, find, simulate, check-bounds, rerun.
//
// Exit codes: 0 success, 2 invalid input, 1 internal error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <lssfind/io.hpp>
#include <lssfind/lssfind.hpp>

namespace {

using lss::io::json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lss::ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Path with the extension replaced, e.g. data.csv -> data.spec.json.
std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / p.stem()).string() + suffix;
}

// Collects inputs, outputs and parameters of one invocation and writes them
// to <primary output>.manifest.json. Contains nothing time-dependent.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args) : command_(std::move(command)), args_(std::move(args)) {}

  void param(const std::string& key, json value) { params_[key] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }

  void input(const std::string& path) { inputs_[path] = sha256_hex(read_file(path)); }

  void output(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << bytes;
    if (!out) throw std::runtime_error("failed writing " + path);
    outputs_[path] = sha256_hex(bytes);
    if (primary_.empty()) primary_ = path;
  }

  void write() const {
    if (primary_.empty()) return;
    json j = {{"command", command_},
              {"args", args_},
              {"params", params_},
              {"seed", seed_},
              {"version", lss::kVersion},
              {"inputs", inputs_},
              {"outputs", outputs_}};
    std::ofstream out(primary_ + ".manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  json params_ = json::object();
  std::uint64_t seed_{0};
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::string primary_;
};

// Writes to `path` through the manifest, or to stdout when no path is given.
void emit(Manifest& manifest, const std::string& path, const std::string& bytes) {
  if (path.empty()) {
    std::cout << bytes;
  } else {
    manifest.output(path, bytes);
  }
}

struct Common {
  std::uint64_t seed{0};
  bool seed_given{false};
  std::string out;
  unsigned threads{1};
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "master seed");
  cmd->add_option("--out", common.out, "output path (stdout when omitted, where allowed)");
  cmd->add_option("--threads", common.threads, "worker threads (0 = all cores)")->capture_default_str();
}

// Arguments worth replaying: everything except --out / --threads.
std::vector<std::string> replay_args(const std::vector<std::string>& argv) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const auto& a = argv[i];
    if (a == "--out" || a == "--threads") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--threads=", 0) == 0) continue;
    kept.push_back(a);
  }
  return kept;
}

// ---- gen -------------------------------------------------------------------

struct GenOptions {
  std::string scenario;
  std::string spec;
  std::size_t n{0};
  std::size_t p{0};
  std::string spec_out;
};

void run_gen(const GenOptions& o, const Common& common, Manifest& manifest) {
  if (common.out.empty()) throw lss::ValidationError("gen needs --out");
  if (o.scenario.empty() == o.spec.empty()) throw lss::ValidationError("gen needs exactly one of --scenario or --spec");
  lss::Dataset data;
  lss::LssSpec spec;
  if (!o.scenario.empty()) {
    manifest.input(o.scenario);
    auto scenario = lss::io::scenario_from_json(lss::io::read_json_file(o.scenario));
    if (common.seed_given) scenario.seed = common.seed;
    if (o.n) scenario.n = o.n;
    if (o.p) scenario.p = o.p;
    lss::validate_scenario(scenario);
    std::tie(data, spec) = lss::gen_dataset(scenario);
    manifest.param("scenario", lss::io::to_json(scenario));
    manifest.seed(scenario.seed);
  } else {
    manifest.input(o.spec);
    spec = lss::io::spec_from_json(lss::io::read_json_file(o.spec));
    const auto report = lss::validate_lss_spec(spec);
    if (!report.ok()) throw lss::ValidationError("spec: " + report.violations.front());
    if (o.n == 0) throw lss::ValidationError("gen --spec needs --n");
    const std::size_t p = o.p ? o.p : spec.max_feature();
    data = lss::sample_dataset(spec, o.n, p, common.seed);
    manifest.param("n", o.n);
    manifest.param("p", p);
    manifest.seed(common.seed);
  }
  std::ostringstream csv;
  lss::io::write_csv(csv, data);
  manifest.output(common.out, csv.str());
  manifest.output(o.spec_out.empty() ? sibling(common.out, ".spec.json") : o.spec_out,
                  lss::io::to_json(spec).dump(2) + "\n");
}

// ---- fit -------------------------------------------------------------------

struct FitOptions {
  std::string data;
  std::size_t trees{100};
  std::size_t mtry{0};
  double epsilon{0.01};
  std::size_t min_child{1};
  double min_child_fraction{0.0};
  bool bootstrap{false};
};

void add_fit_flags(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--trees", o.trees, "number of trees")->capture_default_str();
  cmd->add_option("--mtry", o.mtry, "candidate features per node (default ceil(p/2))");
  cmd->add_option("--epsilon", o.epsilon, "impurity-decrease threshold")->capture_default_str();
  cmd->add_option("--min-child", o.min_child, "minimum samples per child")->capture_default_str();
  cmd->add_option("--min-child-fraction", o.min_child_fraction, "minimum child share of its parent's samples")
      ->capture_default_str();
  cmd->add_flag("--bootstrap", o.bootstrap, "resample rows per tree");
}

lss::Forest fit_from(const FitOptions& o, const Common& common, Manifest& manifest) {
  manifest.input(o.data);
  const auto data = lss::io::read_csv_file(o.data);
  if (data.n() == 0) throw lss::ValidationError(o.data + ": no data rows");
  lss::RfConfig config;
  config.n_trees = o.trees;
  config.mtry = o.mtry;
  config.epsilon = o.epsilon;
  config.min_child_samples = o.min_child;
  config.min_child_fraction = o.min_child_fraction;
  config.bootstrap = o.bootstrap;
  config.seed = common.seed;
  if (o.mtry == 0) {
    std::cerr << "lssfind: --mtry not given, using ceil(p/2) = " << lss::default_mtry(data.p()) << "\n";
  }
  auto forest = lss::fit_forest(data, config, common.threads);
  manifest.param("forest", lss::io::to_json(forest.config));
  manifest.seed(common.seed);
  return forest;
}

lss::Forest load_forest(const std::string& path, Manifest& manifest) {
  manifest.input(path);
  return lss::io::forest_from_json(lss::io::read_json_file(path));
}

// ---- simulate --------------------------------------------------------------

struct SimulateOptions {
  std::string scenario;
  std::vector<std::size_t> K{1};
  std::vector<std::size_t> L{2};
  std::vector<std::string> snr{"50"};
  std::size_t n{1000};
  std::size_t p{20};
  std::size_t overlap{0};
  double alpha{0.0};
  std::string noise{"gaussian"};
  std::size_t runs{40};
  double eta{0.01};
  double epsilon{0.01};
  std::size_t smax{0};
  std::size_t trees{100};
  std::size_t mtry{0};
  bool no_bootstrap{false};
  double min_child_fraction{0.0};
  bool timing{false};
  std::string summary;
};

double parse_snr(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw lss::ValidationError("--snr: '" + s + "' is not a number or 'inf'");
  }
}

void run_simulate(const SimulateOptions& o, const Common& common, Manifest& manifest) {
  if (common.out.empty()) throw lss::ValidationError("simulate needs --out");
  std::vector<lss::ScenarioConfig> cells;
  if (!o.scenario.empty()) {
    manifest.input(o.scenario);
    auto c = lss::io::scenario_from_json(lss::io::read_json_file(o.scenario));
    if (common.seed_given) c.seed = common.seed;
    cells.push_back(c);
  } else {
    for (auto k : o.K) {
      for (auto l : o.L) {
        for (const auto& snr : o.snr) {
          lss::ScenarioConfig c;
          c.K = k;
          c.L = l;
          c.n = o.n;
          c.p = o.p;
          c.snr = parse_snr(snr);
          c.overlap = o.overlap;
          c.correlation_alpha = o.alpha;
          c.noise_family = lss::parse_noise_family(o.noise);
          c.seed = common.seed;
          lss::validate_scenario(c);
          cells.push_back(c);
        }
      }
    }
  }
  lss::FindParams params;
  params.eta = o.eta;
  params.epsilon = o.epsilon;
  params.s_max = o.smax;
  params.n_trees = o.trees;
  if (o.mtry) params.mtry = o.mtry;
  params.bootstrap = !o.no_bootstrap;
  params.min_child_fraction = o.min_child_fraction;

  std::ostringstream csv;
  csv << "K,L,snr,run_index,score,n_sets_found,seconds\n";
  json summary = json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto cell = cells[c];
    // Distinct grid cells get distinct data streams.
    if (cells.size() > 1) cell.seed = lss::derive_seed(cell.seed, 1000 + c);
    const auto result = lss::run_scenario(cell, o.runs, params, common.threads);
    const std::string snr = lss::io::format_double(cell.snr);
    for (const auto& r : result.runs) {
      csv << cell.K << ',' << cell.L << ',' << snr << ',' << r.run_index << ',' << lss::io::format_double(r.score)
          << ',' << r.found.size() << ',' << (o.timing ? lss::io::format_double(r.seconds) : "") << '\n';
    }
    json entry = {{"scenario", lss::io::to_json(cell)},
                  {"runs", o.runs},
                  {"mean", result.mean},
                  {"sd", result.sd}};
    if (o.timing) entry["seconds"] = result.seconds;
    summary.push_back(std::move(entry));
  }
  manifest.param("eta", o.eta);
  manifest.param("epsilon", o.epsilon);
  manifest.param("s_max", o.smax);
  manifest.param("trees", o.trees);
  manifest.param("mtry", o.mtry);
  manifest.param("bootstrap", params.bootstrap);
  manifest.param("runs", o.runs);
  manifest.seed(common.seed);
  manifest.output(common.out, csv.str());
  manifest.output(o.summary.empty() ? sibling(common.out, ".summary.json") : o.summary,
                  json{{"cells", summary}}.dump(2) + "\n");
}

int dispatch(int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const lss::ValidationError& e) {
    std::cerr << "lssfind: " << e.what() << "\n";
    return 2;
  } catch (const lss::CapViolation& e) {
    std::cerr << "lssfind: internal error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "lssfind: " << e.what() << "\n";
    return 1;
  }
}

namespace {

int dispatch(int argc, char** argv) {
  CLI::App app{"Random-forest interaction discovery via depth-weighted prevalence"};
  app.require_subcommand(1);
  std::vector<std::string> raw(argv + 1, argv + argc);

  Common common;
  GenOptions gen;
  FitOptions fit;
  SimulateOptions sim;
  std::string forest_path;
  std::string set_text;
  std::optional<double> epsilon;
  std::string rule = "strict_first";
  std::size_t sample = 0;
  double eta = 0.01;
  std::size_t smax = 3;
  std::string spec_path;
  std::vector<std::string> extra_sets;
  std::optional<double> cm_fallback;
  std::string manifest_path;

  auto* gen_cmd = app.add_subcommand("gen", "generate an LSS dataset");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--scenario", gen.scenario, "scenario JSON");
  gen_cmd->add_option("--spec", gen.spec, "LssSpec JSON");
  gen_cmd->add_option("--n", gen.n, "sample count (overrides the scenario)");
  gen_cmd->add_option("--p", gen.p, "feature count (overrides the scenario)");
  gen_cmd->add_option("--spec-out", gen.spec_out, "where to write the spec JSON");

  auto* fit_cmd = app.add_subcommand("fit", "train a forest");
  add_common(fit_cmd, common);
  fit_cmd->add_option("--data", fit.data, "dataset CSV")->required();
  add_fit_flags(fit_cmd, fit);

  auto* dwp_cmd = app.add_subcommand("dwp", "depth-weighted prevalence of one signed set");
  add_common(dwp_cmd, common);
  dwp_cmd->add_option("--forest", forest_path, "forest JSON")->required();
  dwp_cmd->add_option("--set", set_text, "signed set, e.g. 1-,2-")->required();
  dwp_cmd->add_option("--epsilon", epsilon, "impurity threshold (default: the forest's)");
  dwp_cmd->add_option("--rule", rule, "strict_first | first_above_threshold")->capture_default_str();
  dwp_cmd->add_option("--sample", sample, "estimate from this many random paths instead of exactly");

  auto* find_cmd = app.add_subcommand("find", "run LSSFind");
  add_common(find_cmd, common);
  find_cmd->add_option("--forest", forest_path, "forest JSON (alternative to --data)");
  find_cmd->add_option("--data", fit.data, "dataset CSV to train on");
  add_fit_flags(find_cmd, fit);
  find_cmd->add_option("--eta", eta, "prevalence slack")->capture_default_str();
  find_cmd->add_option("--smax", smax, "largest set size")->capture_default_str();
  find_cmd->add_option("--rule", rule, "strict_first | first_above_threshold")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo recovery study");
  add_common(sim_cmd, common);
  sim_cmd->add_option("--scenario", sim.scenario, "scenario JSON (single cell)");
  sim_cmd->add_option("--K", sim.K, "number of interactions (grid)")->capture_default_str();
  sim_cmd->add_option("--L", sim.L, "interaction order (grid)")->capture_default_str();
  sim_cmd->add_option("--snr", sim.snr, "signal-to-noise ratio or inf (grid)")->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "samples")->capture_default_str();
  sim_cmd->add_option("--p", sim.p, "features")->capture_default_str();
  sim_cmd->add_option("--overlap", sim.overlap, "features shared by consecutive interactions")->capture_default_str();
  sim_cmd->add_option("--alpha", sim.alpha, "AR(1) feature correlation")->capture_default_str();
  sim_cmd->add_option("--noise", sim.noise, "gaussian | laplace | cauchy")->capture_default_str();
  sim_cmd->add_option("--runs", sim.runs, "Monte-Carlo runs per cell")->capture_default_str();
  sim_cmd->add_option("--eta", sim.eta, "prevalence slack")->capture_default_str();
  sim_cmd->add_option("--epsilon", sim.epsilon, "impurity threshold")->capture_default_str();
  sim_cmd->add_option("--smax", sim.smax, "largest set size (0 = L+1)")->capture_default_str();
  sim_cmd->add_option("--trees", sim.trees, "trees per forest")->capture_default_str();
  sim_cmd->add_option("--mtry", sim.mtry, "candidate features per node (default p)");
  sim_cmd->add_flag("--no-bootstrap", sim.no_bootstrap, "grow every tree on the full data");
  sim_cmd->add_option("--min-child-fraction", sim.min_child_fraction, "balanced-split floor")->capture_default_str();
  sim_cmd->add_flag("--timing", sim.timing, "record wall-clock seconds (breaks byte-reproducibility)");
  sim_cmd->add_option("--summary", sim.summary, "where to write the summary JSON");

  auto* bounds_cmd = app.add_subcommand("check-bounds", "compare DWP values with the theoretical bounds");
  add_common(bounds_cmd, common);
  bounds_cmd->add_option("--forest", forest_path, "forest JSON")->required();
  bounds_cmd->add_option("--spec", spec_path, "LssSpec JSON the data came from")->required();
  bounds_cmd->add_option("--epsilon", epsilon, "impurity threshold (default: the forest's)");
  bounds_cmd->add_option("--set", extra_sets, "additional query set (repeatable)");
  bounds_cmd->add_option("--cm-fallback", cm_fallback, "C_m to use when the mtry condition cannot hold");
  bounds_cmd->add_option("--rule", rule, "strict_first | first_above_threshold")->capture_default_str();

  auto* rerun_cmd = app.add_subcommand("rerun", "replay a command from its manifest");
  rerun_cmd->add_option("--manifest", manifest_path, "manifest JSON")->required();
  rerun_cmd->add_option("--out", common.out, "new primary output path")->required();
  rerun_cmd->add_option("--threads", common.threads, "worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (rerun_cmd->parsed()) {
    const auto m = lss::io::read_json_file(manifest_path);
    std::vector<std::string> args{argv[0], m.at("command").get<std::string>()};
    for (const auto& a : m.at("args")) args.push_back(a.get<std::string>());
    args.insert(args.end(), {"--out", common.out, "--threads", std::to_string(common.threads)});
    std::vector<char*> ptrs;
    for (auto& a : args) ptrs.push_back(a.data());
    return dispatch(static_cast<int>(ptrs.size()), ptrs.data());
  }

  CLI::App* active = app.get_subcommands().front();
  const auto* seed_opt = active->get_option_no_throw("--seed");
  common.seed_given = seed_opt != nullptr && seed_opt->count() > 0;
  std::vector<std::string> sub_args(raw.begin() + 1, raw.end());
  Manifest manifest(active->get_name(), replay_args(sub_args));
  const auto first_rule = lss::parse_first_rule(rule);

  if (gen_cmd->parsed()) {
    run_gen(gen, common, manifest);
  } else if (fit_cmd->parsed()) {
    if (common.out.empty()) throw lss::ValidationError("fit needs --out");
    const auto forest = fit_from(fit, common, manifest);
    manifest.output(common.out, lss::io::to_json(forest).dump() + "\n");
  } else if (dwp_cmd->parsed()) {
    const auto forest = load_forest(forest_path, manifest);
    const auto s = lss::parse_signed_set(set_text);
    const double eps = epsilon.value_or(forest.config.epsilon);
    const auto est = sample ? lss::dwp_sample(forest, s, eps, sample, common.seed, first_rule)
                            : lss::dwp_exact(forest, s, eps, first_rule, common.threads);
    json out = {{"set", lss::to_string(s)},
                {"epsilon", eps},
                {"value", est.value},
                {"bound", std::ldexp(1.0, -static_cast<int>(s.size()))},
                {"method", sample ? "sampled" : "exact"}};
    if (est.std_error) out["std_error"] = *est.std_error;
    manifest.param("set", lss::to_string(s));
    manifest.param("epsilon", eps);
    manifest.seed(common.seed);
    emit(manifest, common.out, out.dump(2) + "\n");
  } else if (find_cmd->parsed()) {
    if (forest_path.empty() == fit.data.empty()) throw lss::ValidationError("find needs exactly one of --forest or --data");
    auto forest = forest_path.empty() ? fit_from(fit, common, manifest) : load_forest(forest_path, manifest);
    if (const auto* e = find_cmd->get_option("--epsilon"); e->count() > 0) forest.config.epsilon = fit.epsilon;
    const lss::LssFindParams params{eta, smax, first_rule, common.threads};
    const auto found = lss::lssfind(forest, params);
    json out = {{"params",
                 {{"eta", eta},
                  {"epsilon", forest.config.epsilon},
                  {"s_max", smax},
                  {"rule", rule},
                  {"n_trees", forest.trees.size()},
                  {"min_support", std::ldexp(1.0 - eta, -static_cast<int>(smax))}}},
                {"sets", lss::io::to_json(found)},
                {"maximal", lss::io::to_json(lss::maximal_sets(found))}};
    manifest.param("eta", eta);
    manifest.param("s_max", smax);
    manifest.param("epsilon", forest.config.epsilon);
    emit(manifest, common.out, out.dump(2) + "\n");
  } else if (sim_cmd->parsed()) {
    run_simulate(sim, common, manifest);
  } else if (bounds_cmd->parsed()) {
    const auto forest = load_forest(forest_path, manifest);
    manifest.input(spec_path);
    const auto spec = lss::io::spec_from_json(lss::io::read_json_file(spec_path));
    lss::BoundCheckOptions options;
    for (const auto& s : extra_sets) options.extra_queries.push_back(lss::parse_signed_set(s));
    options.c_m_fallback = cm_fallback;
    options.rule = first_rule;
    options.threads = common.threads;
    const double eps = epsilon.value_or(forest.config.epsilon);
    const auto report = lss::check_theorem_bounds(forest, spec, eps, options);
    manifest.param("epsilon", eps);
    emit(manifest, common.out, lss::io::to_json(report).dump(2) + "\n");
  }
  manifest.write();
  return 0;
}

}  // namespace
