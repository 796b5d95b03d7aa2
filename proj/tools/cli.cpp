#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "npnce/npnce.hpp"

namespace npnce::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kToolVersion = "1.0.0";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Files are staged in memory and written only once every computation has
// succeeded, so a failed run leaves no partial artifacts behind.
struct Artifacts {
  std::map<std::string, std::string> files;  // relative path -> content

  void write_all(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
      const fs::path path = dir / name;
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::binary);
      if (!out) throw InputError("cannot write '" + path.string() + "'");
      out << content;
      if (!out) throw InputError("failed writing '" + path.string() + "'");
    }
  }
};

char parse_delimiter(const std::string& d) {
  if (d == "\\t" || d == "tab") return '\t';
  if (d.size() != 1) throw InputError("--delimiter must be a single character or 'tab'");
  return d[0];
}

CorrelationSource parse_corr(const std::string& s) {
  if (s == "kendall") return CorrelationSource::kendall_sin;
  if (s == "spearman") return CorrelationSource::spearman_sin;
  if (s == "pearson") return CorrelationSource::pearson;
  throw InputError("--corr must be kendall, spearman or pearson");
}

CdfRule parse_rule(const std::string& s) {
  if (s == "gasser-muller") return CdfRule::gasser_muller;
  if (s == "priestley-chao") return CdfRule::priestley_chao;
  throw InputError("--cdf-rule must be gasser-muller or priestley-chao");
}

json edges_json(const Cpdag& g) {
  json out = json::object();
  out["directed"] = json::array();
  out["undirected"] = json::array();
  for (const auto& [a, b] : g.directed_edges()) out["directed"].push_back({a, b});
  for (const auto& [a, b] : g.undirected_edges()) out["undirected"].push_back({a, b});
  return out;
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  std::string input;
  std::string response;
  std::string delimiter = ",";
  double alpha_trim = 0.05;
  double ci_alpha = 0.01;
  std::string corr = "kendall";
  std::optional<std::size_t> max_order;
  std::size_t grid_points = kDefaultGridSize;
  std::size_t bootstrap = kDefaultBootstrapReplicates;
  std::uint64_t seed = 1;
  std::string graph;
  std::string out;
  double bandwidth_cdf = 0.0;
  double bandwidth_quantile = 0.0;
  std::string cdf_rule = "gasser-muller";
  std::size_t extension_cap = kDefaultExtensionCap;
};

int cmd_estimate(const EstimateOptions& o, std::ostream& out) {
  if (o.bootstrap != 0 && o.bootstrap < 20) throw InputError("--bootstrap must be 0 or at least 20");
  if (o.grid_points < 11) throw InputError("--grid-points must be at least 11");
  if (!(o.ci_alpha > 0.0 && o.ci_alpha < 1.0)) throw InputError("--ci-alpha must lie in (0, 1)");
  if (o.bandwidth_cdf < 0.0 || o.bandwidth_quantile < 0.0) throw InputError("bandwidths must be positive (0 = default)");
  const char delim = parse_delimiter(o.delimiter);
  const CorrelationSource source = parse_corr(o.corr);
  KernelSpec kernel;
  kernel.bandwidth_cdf = o.bandwidth_cdf;
  kernel.bandwidth_quantile = o.bandwidth_quantile;
  kernel.cdf_rule = parse_rule(o.cdf_rule);

  DataMatrix data = load_table(o.input, o.response, delim);
  if (!data.response) data.response = data.p() - 1;
  data.validate();
  const Node y = *data.response;

  // Graph: given, or learned with the rank PC algorithm on all rows.
  Cpdag cpdag(data.p(), {}, {});
  std::vector<Dag> dags;
  std::vector<std::string> warnings;
  json pc_info = json::object();
  if (!o.graph.empty()) {
    cpdag = load_edge_list(o.graph, data.p());
    if (cpdag.undirected_count() == 0) {
      dags.push_back(cpdag.to_dag());
    } else {
      dags = enumerate_extensions(cpdag, o.extension_cap);
    }
    pc_info["source"] = "given";
  } else {
    CiTestConfig ci;
    ci.alpha_ci = o.ci_alpha;
    ci.max_order = o.max_order;
    const PcResult pc = estimate_cpdag(data, ci, source);
    cpdag = pc.cpdag;
    warnings = pc.warnings;
    dags = enumerate_extensions(cpdag, o.extension_cap);
    pc_info["source"] = "learned";
    pc_info["tests_run"] = pc.tests_run;
  }

  const TrimmedData trimmed = trim(data, o.alpha_trim);
  const DataMatrix kept = restrict_rows(data, trimmed);
  const FitProtocol protocol = trimmed_protocol(trimmed, data.n(), kernel);
  const auto fits = fit_all(kept, protocol);

  Artifacts artifacts;
  {
    std::ostringstream g;
    g << "# " << cpdag.p() << " nodes; ids are zero-based column positions\n";
    write_edge_list(g, cpdag);
    artifacts.files["cpdag.txt"] = g.str();
  }

  json curves = json::array();
  for (Node i = 0; i < data.p(); ++i) {
    if (i == y) continue;
    for (std::size_t j = 0; j < dags.size(); ++j) {
      CausalEffectCurve curve = nce_curve(fits, kept, dags[j], i, y, o.grid_points);
      curve.dag_id = j;
      json entry = json::object();
      if (o.bootstrap > 0) {
        const auto boot = bootstrap_sd(protocol, kept, dags[j], i, y, curve.grid, o.bootstrap, mix_seed(o.seed, i, j));
        curve.sd = boot.sd;
        entry["bootstrap_used"] = boot.replicates_used;
        entry["bootstrap_skipped"] = boot.replicates_skipped;
      }
      std::ostringstream csv;
      csv << "dag_id,cause,target,x,effect,sd\n";
      for (std::size_t k = 0; k < curve.grid.size(); ++k) {
        csv << j << ',' << data.names[i] << ',' << data.names[y] << ',' << num(curve.grid[k]) << ','
            << num(curve.values[k]) << ',' << (curve.sd ? num((*curve.sd)[k]) : std::string()) << '\n';
      }
      const std::string name = "curves/curve_c" + std::to_string(i) + "_t" + std::to_string(y) + "_d" + std::to_string(j) + ".csv";
      artifacts.files[name] = csv.str();
      entry["file"] = name;
      entry["cause"] = data.names[i];
      entry["target"] = data.names[y];
      entry["dag_id"] = j;
      entry["beta"] = curve.beta;
      entry["target_is_parent"] = curve.target_is_parent;
      curves.push_back(entry);
    }
  }

  json m = json::object();
  m["tool"] = "npnce";
  m["version"] = kToolVersion;
  m["subcommand"] = "estimate";
  m["input"] = o.input;
  m["delimiter"] = std::string(1, delim);
  m["response"] = data.names[y];
  m["columns"] = data.names;
  m["n"] = data.n();
  m["p"] = data.p();
  m["seed"] = o.seed;
  m["trim"] = {{"alpha", o.alpha_trim},
               {"per_variable_level", protocol.alpha},
               {"rows_retained", trimmed.rows.size()},
               {"lower", std::vector<double>(trimmed.lower.data(), trimmed.lower.data() + trimmed.lower.size())},
               {"upper", std::vector<double>(trimmed.upper.data(), trimmed.upper.data() + trimmed.upper.size())}};
  m["structure"] = {{"graph_file", o.graph},
                    {"ci_alpha", o.ci_alpha},
                    {"correlation", to_string(source)},
                    {"max_order", o.max_order ? json(*o.max_order) : json(nullptr)},
                    {"extension_cap", o.extension_cap},
                    {"pc", pc_info},
                    {"warnings", warnings}};
  m["cpdag"] = edges_json(cpdag);
  m["dag_count"] = dags.size();
  json dag_list = json::array();
  for (const auto& g : dags) dag_list.push_back(edges_json(Cpdag::from_dag(g)));
  m["dags"] = dag_list;
  json marg = json::array();
  for (std::size_t v = 0; v < fits.size(); ++v) {
    marg.push_back({{"column", data.names[v]},
                    {"retained", fits[v].sorted_values().size()},
                    {"bandwidth_cdf", fits[v].kernel().bandwidth_cdf},
                    {"bandwidth_quantile", fits[v].kernel().bandwidth_quantile}});
  }
  m["smoother"] = {{"kernel", "triweight"},
                   {"cdf_rule", to_string(kernel.cdf_rule)},
                   {"cdf_step_denominator", "original-n"},
                   {"bandwidth_cdf_override", o.bandwidth_cdf},
                   {"bandwidth_quantile_override", o.bandwidth_quantile},
                   {"grid_size", kMarginalGridSize},
                   {"monotonization", "cumulative-max"},
                   {"latent_clamp", kLatentClamp},
                   {"marginals", marg}};
  m["effect"] = {{"estimator", "nce-first-order"},
                 {"expansion_point", 0.0},
                 {"grid_points", o.grid_points},
                 {"uncertainty", o.bootstrap > 0 ? "nonparametric row bootstrap" : "none"},
                 {"bootstrap", o.bootstrap}};
  m["curves"] = curves;
  artifacts.files["manifest.json"] = m.dump(2) + "\n";

  artifacts.write_all(o.out);
  out << "cpdag: " << cpdag.directed_edges().size() << " directed, " << cpdag.undirected_count()
      << " undirected edges; " << dags.size() << " DAG(s); " << curves.size() << " curve file(s) in " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::size_t p = 10;
  std::optional<double> s;
  std::size_t n = 100;
  std::uint64_t seed = 1;
  std::string marginal = "identity";
  double lambda = 1.0;
  std::string out;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (o.p < 2) throw InputError("--p must be at least 2");
  if (o.n < 1) throw InputError("--n must be positive");
  const double s = o.s ? *o.s : std::min(0.5, 3.0 / static_cast<double>(o.p - 1));
  if (o.marginal != "identity" && o.marginal != "exponential")
    throw InputError("--marginal must be identity or exponential");
  if (!(o.lambda > 0.0)) throw InputError("--lambda must be positive");

  const LinearSem sem = random_dag(o.p, s, mix_seed(o.seed, 0, 1));
  DataMatrix data = sample_gaussian(sem, o.n, mix_seed(o.seed, 0, 2));
  if (o.marginal == "exponential") data = npn_transform(data, MarginalTransform::exponential(o.lambda));

  Artifacts artifacts;
  std::ostringstream d, g, e;
  write_table(d, data);
  write_edge_list(g, sem.dag());
  e << "cause,target,effect\n";
  for (Node i = 0; i < o.p; ++i)
    for (Node y = 0; y < o.p; ++y)
      if (i != y) e << data.names[i] << ',' << data.names[y] << ',' << num(true_effect(sem, i, y)) << '\n';
  artifacts.files["data.csv"] = d.str();
  artifacts.files["true_dag.txt"] = g.str();
  artifacts.files["true_effects.csv"] = e.str();
  artifacts.write_all(o.out);
  out << "wrote " << o.n << " x " << o.p << " sample (" << o.marginal << " marginals) to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- oracle

struct OracleOptions {
  double rho = 0.0;
  double lambda_x = 1.0;
  double lambda_y = 1.0;
  double x_min = 0.05;
  double x_max = 3.0;
  std::size_t grid = 101;
  std::string out;
};

int cmd_oracle(const OracleOptions& o, std::ostream& out) {
  const ExpCopulaModel model{o.rho, o.lambda_x, o.lambda_y};
  model.validate();
  if (!(o.x_min > 0.0 && o.x_max > o.x_min)) throw InputError("need 0 < --x-min < --x-max");
  if (o.grid < 2) throw InputError("--grid must be at least 2");
  std::ostringstream csv;
  csv << "x,effect\n";
  for (std::size_t k = 0; k < o.grid; ++k) {
    const double x = o.x_min + (o.x_max - o.x_min) * static_cast<double>(k) / static_cast<double>(o.grid - 1);
    csv << num(x) << ',' << num(exp_causal_effect_oracle(model, x)) << '\n';
  }
  if (o.out.empty()) {
    out << csv.str();
  } else {
    const fs::path path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + o.out + "'");
    f << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct Preset {
  std::size_t p;
  std::size_t n;
  std::size_t reps;
  DagMode mode;
};

const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table = [] {
    std::map<std::string, Preset> t;
    for (std::size_t p : {10u, 50u})
      for (std::size_t n : {100u, 1000u}) {
        const std::string stem = "table1-p" + std::to_string(p) + "-n" + std::to_string(n);
        t[stem + "-known"] = {p, n, 100, DagMode::known_dag()};
        t[stem + "-alpha0.01"] = {p, n, 100, DagMode::learned(0.01)};
        t[stem + "-alpha0.1"] = {p, n, 100, DagMode::learned(0.1)};
      }
    t["smoke"] = {10, 100, 2, DagMode::known_dag()};
    return t;
  }();
  return table;
}

json summary_json(const MadSummary& s) {
  json cfg = {{"p", s.config.p},
              {"s", s.config.s},
              {"n", s.config.n},
              {"reps", s.config.reps},
              {"method", to_string(s.config.method)},
              {"dag", s.config.dag_mode.known ? "known" : "learned"},
              {"ci_alpha", s.config.dag_mode.known ? json(nullptr) : json(s.config.dag_mode.ci_alpha)},
              {"seed", s.config.seed},
              {"trim_alpha", s.config.trim_alpha},
              {"grid_size", s.config.grid_size},
              {"extension_cap", s.config.extension_cap}};
  json reps = json::array();
  for (const auto& r : s.per_rep) {
    json e = {{"index", r.index}, {"ok", r.ok}};
    if (r.ok) {
      e["mad"] = r.mad;
      e["dags"] = r.extensions;
    } else {
      e["error"] = r.error;
    }
    reps.push_back(e);
  }
  return {{"config", cfg},
          {"reps_ok", s.reps_ok},
          {"reps_failed", s.reps_failed},
          {"mad_mean", s.mad_mean},
          {"mad_sd", s.mad_sd},
          {"per_rep", reps}};
}

struct BenchOptions {
  std::string preset;
  std::optional<std::size_t> reps;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  const auto& table = presets();
  const auto it = table.find(o.preset);
  if (it == table.end()) {
    std::string names;
    for (const auto& [name, _] : table) names += (names.empty() ? "" : ", ") + name;
    throw InputError("unknown preset '" + o.preset + "'; available: " + names);
  }
  const Preset& preset = it->second;
  MadConfig cfg;
  cfg.p = preset.p;
  cfg.s = 3.0 / static_cast<double>(preset.p - 1);
  cfg.n = preset.n;
  cfg.reps = o.reps ? *o.reps : preset.reps;
  cfg.dag_mode = preset.mode;
  cfg.seed = o.seed;

  json result = {{"preset", o.preset}};
  for (EffectMethod method : {EffectMethod::ida, EffectMethod::nce}) {
    cfg.method = method;
    result[to_string(method)] = summary_json(mad_experiment(cfg));
  }
  const std::string text = result.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    const fs::path path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + o.out + "'");
    f << text;
    out << "ida mad " << num(result["ida"]["mad_mean"].get<double>()) << ", nce mad "
        << num(result["nce"]["mad_mean"].get<double>()) << " -> " << o.out << "\n";
  }
  return kExitOk;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

std::vector<std::string> bench_presets() {
  std::vector<std::string> names;
  for (const auto& [name, _] : presets()) names.push_back(name);
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonparanormal causal effect estimation", "npnce"};
  app.require_subcommand(1);

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "Learn or load a graph and estimate effect curves");
  e->add_option("--input", est.input, "Delimited data file with a header row")->required();
  e->add_option("--response", est.response, "Response column (default: last column)");
  e->add_option("--delimiter", est.delimiter, "Field delimiter, or 'tab'");
  e->add_option("--alpha-trim", est.alpha_trim, "Trim level alpha; each variable is cut at alpha/p")->check(CLI::Range(0.0, 0.2499999));
  e->add_option("--ci-alpha", est.ci_alpha, "Significance level of the Fisher-z tests");
  e->add_option("--corr", est.corr, "kendall, spearman or pearson");
  e->add_option("--max-order", est.max_order, "Largest conditioning set size");
  e->add_option("--grid-points", est.grid_points, "Points per effect curve");
  e->add_option("--bootstrap", est.bootstrap, "Bootstrap replicates for the sd column (0 disables)");
  e->add_option("--seed", est.seed, "Random seed");
  e->add_option("--graph", est.graph, "Known DAG or CPDAG edge list; skips structure learning");
  e->add_option("--out", est.out, "Output directory")->required();
  e->add_option("--bandwidth-cdf", est.bandwidth_cdf, "CDF smoother bandwidth (0 = rule of thumb)");
  e->add_option("--bandwidth-quantile", est.bandwidth_quantile, "Quantile smoother bandwidth (0 = rule of thumb)");
  e->add_option("--cdf-rule", est.cdf_rule, "gasser-muller or priestley-chao");
  e->add_option("--extension-cap", est.extension_cap, "Maximum number of DAGs enumerated per CPDAG");

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Sample a random linear SEM");
  s->add_option("--p", sim.p, "Number of variables");
  s->add_option("--s", sim.s, "Edge probability (default 3/(p-1))");
  s->add_option("--n", sim.n, "Sample size");
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("--marginal", sim.marginal, "identity or exponential");
  s->add_option("--lambda", sim.lambda, "Exponential rate");
  s->add_option("--out", sim.out, "Output directory")->required();

  OracleOptions orc;
  auto* q = app.add_subcommand("oracle", "Exact effect curve of the bivariate exponential copula model");
  q->add_option("--rho", orc.rho, "Latent correlation")->required();
  q->add_option("--lambda-x", orc.lambda_x, "Rate of X");
  q->add_option("--lambda-y", orc.lambda_y, "Rate of Y");
  q->add_option("--x-min", orc.x_min, "Grid start (> 0)");
  q->add_option("--x-max", orc.x_max, "Grid end");
  q->add_option("--grid", orc.grid, "Number of grid points");
  q->add_option("--out", orc.out, "Output CSV (default: stdout)");

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Mean absolute deviation experiment");
  b->add_option("--preset", bench.preset, "Preset name")->required();
  b->add_option("--reps", bench.reps, "Override the replicate count");
  b->add_option("--seed", bench.seed, "Random seed");
  b->add_option("--out", bench.out, "Output JSON (default: stdout)");

  std::vector<std::string> argv_store{"npnce"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << one_line(ex.what()) << "\n";
    return kExitInput;
  }

  try {
    if (e->parsed()) return cmd_estimate(est, out);
    if (s->parsed()) return cmd_simulate(sim, out);
    if (q->parsed()) return cmd_oracle(orc, out);
    return cmd_bench(bench, out);
  } catch (const InputError& ex) {
    err << "error: " << one_line(ex.what()) << "\n";
    return kExitInput;
  } catch (const EstimationError& ex) {
    err << "estimation error: " << one_line(ex.what()) << "\n";
    return kExitEstimation;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << one_line(ex.what()) << "\n";
    return kExitInput;
  } catch (const std::exception& ex) {
    err << "error: " << one_line(ex.what()) << "\n";
    return kExitEstimation;
  }
}

}  // namespace npnce::cli
