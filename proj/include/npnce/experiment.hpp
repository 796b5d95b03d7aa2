#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "npnce/dataset.hpp"
#include "npnce/effects.hpp"
#include "npnce/error.hpp"
#include "npnce/graph.hpp"
#include "npnce/rpc.hpp"
#include "npnce/simulate.hpp"

namespace npnce {

enum class EffectMethod { ida, nce };

inline const char* to_string(EffectMethod m) { return m == EffectMethod::ida ? "ida" : "nce"; }

/// Known DAG, or a CPDAG learned at level ci_alpha. IDA learns with Pearson
/// correlations, NCE with the rank correlation `source`.
struct DagMode {
  bool known = true;
  double ci_alpha = 0.01;
  CorrelationSource source = CorrelationSource::kendall_sin;

  static DagMode known_dag() { return {}; }
  static DagMode learned(double alpha) { return {false, alpha, CorrelationSource::kendall_sin}; }
};

struct MadConfig {
  std::size_t p = 10;
  double s = 3.0 / 9.0;
  std::size_t n = 1000;
  std::size_t reps = 100;
  EffectMethod method = EffectMethod::ida;
  DagMode dag_mode;
  std::uint64_t seed = 1;
  /// NCE only.
  double trim_alpha = 0.05;
  std::size_t grid_size = kDefaultGridSize;
  std::size_t extension_cap = kDefaultExtensionCap;
};

struct MadReplicate {
  std::size_t index = 0;
  bool ok = false;
  double mad = 0.0;
  /// DAGs averaged over (1 when the DAG is known).
  std::size_t extensions = 1;
  std::string error;
};

struct MadSummary {
  MadConfig config;
  std::size_t reps_ok = 0;
  std::size_t reps_failed = 0;
  double mad_mean = 0.0;
  double mad_sd = 0.0;
  std::vector<MadReplicate> per_rep;
};

namespace detail {

// Mean over ordered pairs (i, y) of the absolute deviation of the estimate
// from the truth, averaged over DAGs in `dags` and, for NCE, over the grid.
inline double replicate_mad(const MadConfig& cfg, const LinearSem& sem, const DataMatrix& data, const std::vector<Dag>& dags) {
  const std::size_t p = sem.p();
  std::vector<std::vector<double>> truth(p, std::vector<double>(p, 0.0));
  for (Node i = 0; i < p; ++i)
    for (Node y = 0; y < p; ++y)
      if (i != y) truth[i][y] = true_effect(sem, i, y);

  double total = 0.0;
  if (cfg.method == EffectMethod::ida) {
    for (const auto& g : dags)
      for (Node i = 0; i < p; ++i)
        for (Node y = 0; y < p; ++y)
          if (i != y) total += std::abs(gaussian_effect(data, g, i, y) - truth[i][y]);
  } else {
    const TrimmedData trimmed = trim(data, cfg.trim_alpha);
    const DataMatrix kept = restrict_rows(data, trimmed);
    const auto fits = fit_all(kept, trimmed_protocol(trimmed, data.n()));
    for (const auto& g : dags)
      for (Node i = 0; i < p; ++i)
        for (Node y = 0; y < p; ++y) {
          if (i == y) continue;
          const auto curve = nce_curve(fits, kept, g, i, y, cfg.grid_size);
          double dev = 0.0;
          for (double v : curve.values) dev += std::abs(v - truth[i][y]);
          total += dev / static_cast<double>(curve.values.size());
        }
  }
  return total / static_cast<double>(dags.size() * p * (p - 1));
}

}  // namespace detail

/// Mean absolute deviation of estimated from true Gaussian causal effects
/// over random SEMs. Replicate r uses seeds derived from (seed, r) only, so
/// IDA and NCE runs with equal seeds see the same graphs and samples.
inline MadSummary mad_experiment(const MadConfig& cfg) {
  if (cfg.reps < 2) throw InputError("mad_experiment: reps must be at least 2");
  if (cfg.p < 2) throw InputError("mad_experiment: p must be at least 2");
  if (cfg.n < 10) throw InputError("mad_experiment: n must be at least 10");
  MadSummary out;
  out.config = cfg;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    MadReplicate rep;
    rep.index = r;
    try {
      const LinearSem sem = random_dag(cfg.p, cfg.s, mix_seed(cfg.seed, r, 1));
      const DataMatrix data = sample_gaussian(sem, cfg.n, mix_seed(cfg.seed, r, 2));
      std::vector<Dag> dags;
      if (cfg.dag_mode.known) {
        dags.push_back(sem.dag());
      } else {
        CiTestConfig ci;
        ci.alpha_ci = cfg.dag_mode.ci_alpha;
        const auto source = cfg.method == EffectMethod::ida ? CorrelationSource::pearson : cfg.dag_mode.source;
        dags = enumerate_extensions(estimate_cpdag(data, ci, source).cpdag, cfg.extension_cap);
      }
      rep.extensions = dags.size();
      rep.mad = detail::replicate_mad(cfg, sem, data, dags);
      rep.ok = true;
    } catch (const Error& e) {
      rep.error = e.what();
    }
    out.per_rep.push_back(rep);
  }

  double sum = 0.0;
  for (const auto& rep : out.per_rep)
    if (rep.ok) {
      ++out.reps_ok;
      sum += rep.mad;
    }
  out.reps_failed = out.per_rep.size() - out.reps_ok;
  if (out.reps_ok == 0) throw EstimationError("mad_experiment: every replicate failed");
  out.mad_mean = sum / static_cast<double>(out.reps_ok);
  double ss = 0.0;
  for (const auto& rep : out.per_rep)
    if (rep.ok) ss += (rep.mad - out.mad_mean) * (rep.mad - out.mad_mean);
  out.mad_sd = out.reps_ok > 1 ? std::sqrt(ss / static_cast<double>(out.reps_ok - 1)) : 0.0;
  return out;
}

}  // namespace npnce
