#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "npnce/dataset.hpp"
#include "npnce/error.hpp"
#include "npnce/graph.hpp"
#include "npnce/marginals.hpp"
#include "npnce/normal.hpp"
#include "npnce/regression.hpp"

namespace npnce {

/// Anything that can stand in for a fitted marginal in the NCE estimator:
/// a CDF, its derivative, the derivative of the quantile function, and the
/// ranges where those are valid.
template <class M>
concept MarginalModel = requires(const M& m, double v) {
  { m.cdf(v) } -> std::convertible_to<double>;
  { m.cdf_derivative(v) } -> std::convertible_to<double>;
  { m.quantile_derivative(v) } -> std::convertible_to<double>;
  { m.support() } -> std::convertible_to<Interval>;
  { m.interior() } -> std::convertible_to<Interval>;
};

/// A known normal marginal N(mean, sd^2), restricted to `range`.
struct GaussianMarginal {
  double mean = 0.0;
  double sd = 1.0;
  Interval range{-4.0, 4.0};

  double cdf(double x) const { return std_cdf((x - mean) / sd); }
  double cdf_derivative(double x) const { return std_pdf((x - mean) / sd) / sd; }
  double quantile_derivative(double u) const { return sd / std_pdf(std_quantile(u)); }
  Interval support() const { return range; }
  Interval interior() const { return range; }
};

static_assert(MarginalModel<MarginalFit>);
static_assert(MarginalModel<GaussianMarginal>);

/// Causal effect of X_i on Y for Gaussian data in DAG g: the coefficient of
/// X_i when regressing Y on X_i and X_pa(i) with an intercept. Zero when Y
/// is a parent of X_i.
inline double gaussian_effect(const DataMatrix& data, const Dag& g, Node i, Node y) {
  if (i == y) throw InputError("gaussian_effect: cause equals target");
  if (i >= data.p() || y >= data.p()) throw InputError("gaussian_effect: node out of range");
  const auto& pa = g.parents(i);
  if (pa.count(y)) return 0.0;
  Eigen::MatrixXd x(data.values.rows(), static_cast<Eigen::Index>(pa.size() + 1));
  x.col(0) = data.values.col(static_cast<Eigen::Index>(i));
  Eigen::Index col = 1;
  for (Node k : pa) x.col(col++) = data.values.col(static_cast<Eigen::Index>(k));
  return ols_with_intercept(x, data.values.col(static_cast<Eigen::Index>(y)))(1);
}

struct LatentRegression {
  double beta_i = 0.0;
  Eigen::VectorXd beta_parents;
  double intercept = 0.0;
  std::size_t n_used = 0;
};

/// Latent scores z = Phi^-1(F(x)) of one column under marginal m.
template <MarginalModel M>
Eigen::VectorXd latent_scores(const M& m, const Eigen::VectorXd& column) {
  Eigen::VectorXd z(column.size());
  const Interval support = m.support();
  for (Eigen::Index r = 0; r < column.size(); ++r) z(r) = to_latent(m.cdf(support.clamp(column(r)))).z;
  return z;
}

namespace detail {

template <MarginalModel M>
LatentRegression latent_regression(const M& cause, std::span<const M* const> parent_fits, const M& target,
                                   const Eigen::VectorXd& cause_col, const Eigen::MatrixXd& parent_cols,
                                   const Eigen::VectorXd& target_col) {
  const auto n = cause_col.size();
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(parent_fits.size() + 1));
  design.col(0) = latent_scores(cause, cause_col);
  for (std::size_t k = 0; k < parent_fits.size(); ++k)
    design.col(static_cast<Eigen::Index>(k + 1)) = latent_scores(*parent_fits[k], parent_cols.col(static_cast<Eigen::Index>(k)));
  const Eigen::VectorXd coef = ols_with_intercept(design, latent_scores(target, target_col));
  LatentRegression out;
  out.intercept = coef(0);
  out.beta_i = coef(1);
  out.beta_parents = coef.tail(coef.size() - 2);
  out.n_used = static_cast<std::size_t>(n);
  return out;
}

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& values, const std::set<Node>& cols) {
  Eigen::MatrixXd out(values.rows(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index k = 0;
  for (Node c : cols) out.col(k++) = values.col(static_cast<Eigen::Index>(c));
  return out;
}

}  // namespace detail

/// Regression of the latent target score on the latent cause and parent
/// scores, intercept included. `data` holds the rows the marginals were fitted
/// on; `fits[v]` is the marginal of variable v.
template <MarginalModel M>
LatentRegression latent_beta(const std::vector<M>& fits, const DataMatrix& data, const Dag& g, Node i, Node y) {
  if (i == y) throw InputError("latent_beta: cause equals target");
  if (fits.size() != data.p() || g.p() != data.p()) throw InputError("latent_beta: fits, data and graph disagree on p");
  const auto& pa = g.parents(i);
  if (pa.count(y)) throw InputError("latent_beta: target is a parent of the cause; the effect is zero");
  std::vector<const M*> parent_fits;
  for (Node k : pa) parent_fits.push_back(&fits[k]);
  return detail::latent_regression<M>(fits[i], parent_fits, fits[y], data.values.col(static_cast<Eigen::Index>(i)),
                                      detail::gather_columns(data.values, pa),
                                      data.values.col(static_cast<Eigen::Index>(y)));
}

/// Sampled effect function x -> CE(Y | do(X_i = x)) for one DAG.
struct CausalEffectCurve {
  Node cause = 0;
  Node target = 0;
  std::size_t dag_id = 0;
  std::vector<double> grid;
  std::vector<double> values;
  std::optional<std::vector<double>> sd;
  /// Latent regression coefficient used; zero for the parent case.
  double beta = 0.0;
  /// True when the target is a parent of the cause in this DAG.
  bool target_is_parent = false;
};

inline constexpr std::size_t kDefaultGridSize = 101;

/// Equally spaced points over the cause's bandwidth interior.
template <MarginalModel M>
std::vector<double> effect_grid(const M& cause, std::size_t grid_size) {
  if (grid_size < 11) throw InputError("effect grid needs at least 11 points");
  const Interval range = cause.interior();
  std::vector<double> grid(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k)
    grid[k] = range.lo + range.width() * static_cast<double>(k) / static_cast<double>(grid_size - 1);
  return grid;
}

/// First-order estimator at z0 = 0:
///   beta * phi(0)/phi(z(x)) * (F_Y^-1)'(0.5) * F_i'(x),  z(x) = Phi^-1(F_i(x)).
/// Grid points outside the cause's support take the nearest supported value.
template <MarginalModel M>
std::vector<double> nce_values(const M& cause, const M& target, double beta, std::span<const double> grid) {
  const double scale = beta * std_pdf(0.0) * target.quantile_derivative(0.5);
  const Interval support = cause.support();
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = support.clamp(grid[k]);
    const double z = to_latent(cause.cdf(x)).z;
    values[k] = scale / std_pdf(z) * cause.cdf_derivative(x);
  }
  return values;
}

/// NCE curve of cause i on target y in DAG g over a grid of `grid_size`
/// points spanning the cause's bandwidth interior. Identically zero when y
/// is a parent of i.
template <MarginalModel M>
CausalEffectCurve nce_curve(const std::vector<M>& fits, const DataMatrix& data, const Dag& g, Node i, Node y,
                            std::size_t grid_size = kDefaultGridSize) {
  if (i == y) throw InputError("nce_curve: cause equals target");
  if (i >= fits.size() || y >= fits.size()) throw InputError("nce_curve: node out of range");
  CausalEffectCurve curve;
  curve.cause = i;
  curve.target = y;
  curve.grid = effect_grid(fits[i], grid_size);
  if (g.parents(i).count(y)) {
    curve.target_is_parent = true;
    curve.values.assign(curve.grid.size(), 0.0);
    return curve;
  }
  const auto reg = latent_beta(fits, data, g, i, y);
  curve.beta = reg.beta_i;
  curve.values = nce_values(fits[i], fits[y], reg.beta_i, curve.grid);
  if (reg.beta_i != 0.0 && std::all_of(curve.values.begin(), curve.values.end(), [](double v) { return v == 0.0; }))
    throw EstimationError("nce_curve: estimated density of the cause vanishes on the whole grid");
  return curve;
}

/// Curves for every (cause, extension) pair computed over one equivalence
/// class. `curves` is ordered by (cause, dag_id).
struct EffectMultiset {
  std::vector<Dag> extensions;
  std::vector<CausalEffectCurve> curves;

  std::size_t m() const { return extensions.size(); }

  const CausalEffectCurve& at(Node cause, std::size_t dag_id) const {
    for (const auto& c : curves)
      if (c.cause == cause && c.dag_id == dag_id) return c;
    throw InputError("EffectMultiset: no curve for cause " + std::to_string(cause) + " in DAG " + std::to_string(dag_id));
  }
};

/// One NCE curve per consistent extension of c.
template <MarginalModel M>
EffectMultiset nce_over_class(const std::vector<M>& fits, const DataMatrix& data, const Cpdag& c, Node i, Node y,
                              std::size_t grid_size = kDefaultGridSize, std::size_t cap = kDefaultExtensionCap) {
  EffectMultiset out;
  out.extensions = enumerate_extensions(c, cap);
  for (std::size_t j = 0; j < out.extensions.size(); ++j) {
    auto curve = nce_curve(fits, data, out.extensions[j], i, y, grid_size);
    curve.dag_id = j;
    out.curves.push_back(std::move(curve));
  }
  return out;
}

/// How marginals are refitted inside the bootstrap.
struct FitProtocol {
  double alpha = 0.05;
  /// Sample size before trimming; sets the CDF step heights.
  std::size_t n_total = 0;
  /// Zero bandwidths mean the rule-of-thumb default for each resample.
  KernelSpec kernel;
  CdfWeights weights = CdfWeights::original_count;
};

/// Protocol for marginals fitted on jointly trimmed rows. Each variable was
/// cut at its own alpha/p quantiles, which is where its smoothers start.
inline FitProtocol trimmed_protocol(const TrimmedData& trimmed, std::size_t n_total, KernelSpec kernel = {}) {
  FitProtocol protocol;
  protocol.alpha = trimmed.alpha / static_cast<double>(trimmed.lower.size());
  protocol.n_total = n_total;
  protocol.kernel = kernel;
  return protocol;
}

inline MarginalFit fit_column(const Eigen::VectorXd& column, const FitProtocol& protocol) {
  return fit_marginal(std::vector<double>(column.data(), column.data() + column.size()),
                      std::max<std::size_t>(protocol.n_total, static_cast<std::size_t>(column.size())), protocol.alpha,
                      protocol.kernel, protocol.weights);
}

/// Fits every column of `data` under `protocol`.
inline std::vector<MarginalFit> fit_all(const DataMatrix& data, const FitProtocol& protocol) {
  std::vector<MarginalFit> fits;
  fits.reserve(data.p());
  for (std::size_t j = 0; j < data.p(); ++j) fits.push_back(fit_column(data.values.col(static_cast<Eigen::Index>(j)), protocol));
  return fits;
}

struct BootstrapResult {
  std::vector<double> sd;
  std::size_t replicates_used = 0;
  std::size_t replicates_skipped = 0;
};

inline constexpr std::size_t kDefaultBootstrapReplicates = 100;

/// Random stream of one bootstrap replicate; depends only on (seed, index).
inline std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6e6365u};
  return std::mt19937_64(seq);
}

/// Pointwise standard deviation of the NCE curve under the nonparametric
/// row bootstrap: resample rows of `data`, refit the cause, parent and target
/// marginals and the latent regression, and re-evaluate on `grid`.
inline BootstrapResult bootstrap_sd(const FitProtocol& protocol, const DataMatrix& data, const Dag& g, Node i, Node y,
                                    std::span<const double> grid, std::size_t replicates, std::uint64_t seed) {
  if (replicates < 20) throw InputError("bootstrap_sd: need at least 20 replicates");
  if (i == y || i >= data.p() || y >= data.p()) throw InputError("bootstrap_sd: invalid cause/target");
  BootstrapResult out;
  if (g.parents(i).count(y)) {
    out.sd.assign(grid.size(), 0.0);
    out.replicates_used = replicates;
    return out;
  }

  const auto n = data.values.rows();
  const auto& pa = g.parents(i);
  std::vector<double> sum(grid.size(), 0.0), sum_sq(grid.size(), 0.0);
  Eigen::MatrixXd sample(n, data.values.cols());
  for (std::size_t b = 0; b < replicates; ++b) {
    auto rng = replicate_stream(seed, b);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (Eigen::Index r = 0; r < n; ++r) sample.row(r) = data.values.row(pick(rng));
    try {
      const MarginalFit cause = fit_column(sample.col(static_cast<Eigen::Index>(i)), protocol);
      const MarginalFit target = fit_column(sample.col(static_cast<Eigen::Index>(y)), protocol);
      std::vector<MarginalFit> parent_fits;
      for (Node k : pa) parent_fits.push_back(fit_column(sample.col(static_cast<Eigen::Index>(k)), protocol));
      std::vector<const MarginalFit*> parent_ptrs;
      for (const auto& f : parent_fits) parent_ptrs.push_back(&f);
      const auto reg = detail::latent_regression<MarginalFit>(cause, parent_ptrs, target,
                                                              sample.col(static_cast<Eigen::Index>(i)),
                                                              detail::gather_columns(sample, pa),
                                                              sample.col(static_cast<Eigen::Index>(y)));
      const auto values = nce_values(cause, target, reg.beta_i, grid);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        sum[k] += values[k];
        sum_sq[k] += values[k] * values[k];
      }
      ++out.replicates_used;
    } catch (const Error&) {
      ++out.replicates_skipped;
    }
  }
  if (out.replicates_skipped * 10 > replicates)
    throw EstimationError("bootstrap_sd: " + std::to_string(out.replicates_skipped) + " of " +
                          std::to_string(replicates) + " resamples were degenerate");
  const double used = static_cast<double>(out.replicates_used);
  out.sd.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mean = sum[k] / used;
    out.sd[k] = std::sqrt(std::max(0.0, (sum_sq[k] - used * mean * mean) / (used - 1.0)));
  }
  return out;
}

}  // namespace npnce
