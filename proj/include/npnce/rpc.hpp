#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "npnce/dataset.hpp"
#include "npnce/error.hpp"
#include "npnce/graph.hpp"
#include "npnce/normal.hpp"

namespace npnce {

enum class CorrelationSource { pearson, kendall_sin, spearman_sin };

inline const char* to_string(CorrelationSource s) {
  switch (s) {
    case CorrelationSource::pearson: return "pearson";
    case CorrelationSource::kendall_sin: return "kendall";
    case CorrelationSource::spearman_sin: return "spearman";
  }
  return "?";
}

/// Correlation matrix on the latent Pearson scale.
struct CorrelationMatrix {
  Eigen::MatrixXd values;
  /// Transformed pairwise entries before the PSD repair.
  Eigen::MatrixXd pairwise;
  CorrelationSource source = CorrelationSource::pearson;
  /// Shrinkage weight toward the identity applied by the PSD repair.
  double shrinkage = 0.0;

  std::size_t p() const { return static_cast<std::size_t>(values.rows()); }
};

struct CiTestConfig {
  double alpha_ci = 0.01;
  /// Largest conditioning set size; unset means p - 2.
  std::optional<std::size_t> max_order;
};

namespace detail {

// Sorts v[lo, hi) in place and returns the number of inversions (swaps a
// bubble sort would make).
inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buffer, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buffer, lo, mid) + merge_count(v, buffer, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buffer[k++] = v[j++];
    } else {
      buffer[k++] = v[i++];
    }
  }
  while (i < mid) buffer[k++] = v[i++];
  while (j < hi) buffer[k++] = v[j++];
  std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over tie groups of t(t-1)/2 in an already sorted range.
template <class It, class Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    auto run_end = std::next(first);
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const auto t = static_cast<std::uint64_t>(std::distance(first, run_end));
    total += t * (t - 1) / 2;
    first = run_end;
  }
  return total;
}

}  // namespace detail

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InputError("kendall_tau: need at least 2 observations");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t ties_x = detail::tied_pairs(order.begin(), order.end(),
                                                  [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::uint64_t ties_xy = detail::tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] == x[b] && y[a] == y[b];
  });

  std::vector<double> ys(n), buffer(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
  const std::uint64_t swaps = detail::merge_count(ys, buffer, 0, n);
  const std::uint64_t ties_y = detail::tied_pairs(ys.begin(), ys.end(), std::equal_to<>{});

  if (ties_x == total || ties_y == total) throw InputError("kendall_tau: zero-variance input");
  const double numerator = static_cast<double>(total) - static_cast<double>(ties_x) - static_cast<double>(ties_y) +
                           static_cast<double>(ties_xy) - 2.0 * static_cast<double>(swaps);
  const double denominator = std::sqrt(static_cast<double>(total - ties_x)) * std::sqrt(static_cast<double>(total - ties_y));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

/// Latent Pearson correlation implied by Kendall's tau under a Gaussian
/// copula: sin(pi tau / 2).
inline double tau_to_pearson(double tau) {
  if (!(std::abs(tau) <= 1.0)) throw DomainError("tau_to_pearson: |tau| > 1");
  return std::sin(std::numbers::pi * tau / 2.0);
}

/// Latent Pearson correlation implied by Spearman's rho: 2 sin(pi rho / 6).
inline double rho_to_pearson(double rho) {
  if (!(std::abs(rho) <= 1.0)) throw DomainError("rho_to_pearson: |rho| > 1");
  if (std::abs(rho) == 1.0) return rho;  // 2 sin(pi / 6) rounds below 1
  return 2.0 * std::sin(std::numbers::pi * rho / 6.0);
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson_correlation: length mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw InputError("pearson_correlation: zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Average ranks (1-based), ties share their mean rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_correlation(rx, ry);
}

inline constexpr double kEigenvalueFloor = 1e-8;

/// Shrinks m toward the identity by the smallest weight that lifts its
/// smallest eigenvalue to the floor. Returns the weight used (0 if none).
inline double repair_psd(Eigen::MatrixXd& m, double floor = kEigenvalueFloor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  const double smallest = solver.eigenvalues().minCoeff();
  if (smallest >= floor) return 0.0;
  const double lambda = (floor - smallest) / (1.0 - smallest);
  m = lambda * Eigen::MatrixXd::Identity(m.rows(), m.cols()) + (1.0 - lambda) * m;
  return lambda;
}

/// Pairwise rank correlations of the columns of `values`, mapped to the
/// latent Pearson scale, then repaired to be positive semidefinite.
inline CorrelationMatrix rank_correlation_matrix(const Eigen::MatrixXd& values, CorrelationSource source) {
  const auto n = values.rows();
  const auto p = values.cols();
  if (n < 10) throw InputError("rank_correlation_matrix: need at least 10 rows");

  std::vector<std::vector<double>> columns(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    columns[static_cast<std::size_t>(j)].assign(values.col(j).data(), values.col(j).data() + n);
    const auto& c = columns[static_cast<std::size_t>(j)];
    if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); }))
      throw InputError("rank_correlation_matrix: zero-variance column " + std::to_string(j));
  }
  if (source == CorrelationSource::spearman_sin)
    for (auto& c : columns) c = average_ranks(c);

  CorrelationMatrix out;
  out.source = source;
  out.values = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) {
      const auto& x = columns[static_cast<std::size_t>(a)];
      const auto& y = columns[static_cast<std::size_t>(b)];
      double r = 0.0;
      switch (source) {
        case CorrelationSource::pearson: r = pearson_correlation(x, y); break;
        case CorrelationSource::kendall_sin: r = tau_to_pearson(kendall_tau(x, y)); break;
        case CorrelationSource::spearman_sin: r = rho_to_pearson(pearson_correlation(x, y)); break;
      }
      out.values(a, b) = out.values(b, a) = r;
    }
  }
  out.pairwise = out.values;
  out.shrinkage = repair_psd(out.values);
  return out;
}

inline CorrelationMatrix rank_correlation_matrix(const DataMatrix& data, CorrelationSource source) {
  return rank_correlation_matrix(data.values, source);
}

/// Partial correlation of i and j given S from the inverse of the
/// {i, j} u S block: -W_ij / sqrt(W_ii W_jj).
inline double partial_correlation(const CorrelationMatrix& c, Node i, Node j, const std::vector<Node>& s) {
  const std::size_t p = c.p();
  if (i >= p || j >= p) throw InputError("partial_correlation: node out of range");
  if (i == j) throw InputError("partial_correlation: i == j");
  for (Node k : s)
    if (k == i || k == j || k >= p) throw InputError("partial_correlation: invalid conditioning node");
  if (s.empty()) return c.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  std::vector<Node> idx{i, j};
  idx.insert(idx.end(), s.begin(), s.end());
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd block(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      block(a, b) = c.values(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]),
                             static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
  const double max_d = ldlt.vectorD().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, max_d))
    throw SingularMatrix("partial_correlation: singular conditioning block");
  const Eigen::MatrixXd precision = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
  const double r = -precision(0, 1) / std::sqrt(precision(0, 0) * precision(1, 1));
  return std::clamp(r, -1.0, 1.0);
}

enum class CiResult { independent, dependent };

/// Outcome of one test, with the statistic for diagnostics.
struct CiOutcome {
  CiResult result = CiResult::independent;
  double statistic = 0.0;
  bool singular = false;
};

/// Fisher-z test: independent iff sqrt(n - |S| - 3) |atanh r| <= z_{1 - alpha/2}.
/// A singular conditioning block is reported as independent.
inline CiOutcome ci_test_detail(const CorrelationMatrix& c, double n_eff, Node i, Node j, const std::vector<Node>& s,
                                const CiTestConfig& cfg) {
  if (!(cfg.alpha_ci > 0.0 && cfg.alpha_ci < 1.0)) throw DomainError("ci_test: alpha must lie in (0, 1)");
  const double dof = n_eff - static_cast<double>(s.size()) - 3.0;
  if (!(dof > 0.0)) throw InputError("ci_test: effective sample size too small for conditioning set");
  double r = 0.0;
  try {
    r = partial_correlation(c, i, j, s);
  } catch (const SingularMatrix&) {
    return {CiResult::independent, 0.0, true};
  }
  const double stat = std::sqrt(dof) * std::abs(std::atanh(r));
  const double critical = std_quantile(1.0 - cfg.alpha_ci / 2.0);
  return {stat <= critical ? CiResult::independent : CiResult::dependent, stat, false};
}

inline CiResult ci_test(const CorrelationMatrix& c, double n_eff, Node i, Node j, const std::vector<Node>& s,
                        const CiTestConfig& cfg) {
  return ci_test_detail(c, n_eff, i, j, s, cfg).result;
}

/// Everything the PC search produced besides the graph itself.
struct PcResult {
  Cpdag cpdag;
  Cpdag skeleton;  // all edges undirected
  std::map<Edge, std::vector<Node>> separating_sets;  // key (a, b), a < b
  std::vector<std::string> warnings;
  std::size_t tests_run = 0;
};

namespace detail {

// Calls f on each size-k subset of `pool` in lexicographic order until f
// returns true. Returns whether f returned true.
template <class F>
bool for_each_subset(const std::vector<Node>& pool, std::size_t k, F&& f) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<Node> subset(k);
  while (true) {
    for (std::size_t t = 0; t < k; ++t) subset[t] = pool[pick[t]];
    if (f(subset)) return true;
    std::size_t t = k;
    while (t > 0 && pick[t - 1] == pool.size() - k + t - 1) --t;
    if (t == 0) return false;
    ++pick[t - 1];
    for (std::size_t u = t; u < k; ++u) pick[u] = pick[u - 1] + 1;
  }
}

}  // namespace detail

/// PC search on a correlation matrix: level-wise skeleton with adjacency
/// sets frozen at the start of each level, v-structures from separating
/// sets, then Meek closure. Conflicting orientations stay undirected.
inline PcResult estimate_cpdag(const CorrelationMatrix& c, double n_eff, const CiTestConfig& cfg) {
  const std::size_t p = c.p();
  if (!(n_eff >= 10.0)) throw InputError("estimate_cpdag: need at least 10 observations");
  const std::size_t max_order = cfg.max_order.value_or(p >= 2 ? p - 2 : 0);

  std::vector<std::set<Node>> adj(p);
  for (Node a = 0; a < p; ++a)
    for (Node b = 0; b < p; ++b)
      if (a != b) adj[a].insert(b);

  PcResult result;
  bool singular_warned = false;
  for (std::size_t level = 0; level <= max_order; ++level) {
    const auto frozen = adj;
    bool any_candidate = false;
    for (Node a = 0; a < p; ++a) {
      for (Node b : frozen[a]) {
        if (!adj[a].count(b)) continue;  // removed earlier this level
        std::vector<Node> pool;
        for (Node k : frozen[a])
          if (k != b) pool.push_back(k);
        if (pool.size() < level) continue;
        if (n_eff - static_cast<double>(level) - 3.0 <= 0.0) continue;
        any_candidate = true;
        const bool removed = detail::for_each_subset(pool, level, [&](const std::vector<Node>& s) {
          ++result.tests_run;
          const auto outcome = ci_test_detail(c, n_eff, a, b, s, cfg);
          if (outcome.singular && !singular_warned) {
            result.warnings.push_back("singular conditioning block treated as independence");
            singular_warned = true;
          }
          if (outcome.result != CiResult::independent) return false;
          result.separating_sets.emplace(Edge{std::min(a, b), std::max(a, b)}, s);
          return true;
        });
        if (removed) {
          adj[a].erase(b);
          adj[b].erase(a);
        }
      }
    }
    if (!any_candidate) break;
  }

  std::vector<Edge> skeleton;
  for (Node a = 0; a < p; ++a)
    for (Node b : adj[a])
      if (a < b) skeleton.emplace_back(a, b);
  result.skeleton = Cpdag(p, {}, skeleton);

  // Unshielded triples a - k - b: collider unless k separated a and b.
  std::map<Edge, int> demanded;  // (from, to) -> count
  for (Node k = 0; k < p; ++k) {
    for (auto ia = adj[k].begin(); ia != adj[k].end(); ++ia) {
      for (auto ib = std::next(ia); ib != adj[k].end(); ++ib) {
        const Node a = *ia, b = *ib;
        if (adj[a].count(b)) continue;
        const auto sep = result.separating_sets.find({std::min(a, b), std::max(a, b)});
        const bool k_separates = sep != result.separating_sets.end() &&
                                 std::find(sep->second.begin(), sep->second.end(), k) != sep->second.end();
        if (!k_separates) {
          ++demanded[{a, k}];
          ++demanded[{b, k}];
        }
      }
    }
  }

  Cpdag g(p, {}, skeleton);
  for (const auto& [edge, count] : demanded) {
    const auto [from, to] = edge;
    if (demanded.count({to, from})) {
      if (from < to)
        result.warnings.push_back("conflicting v-structure orientation on " + std::to_string(from) + " -- " +
                                  std::to_string(to) + " left undirected");
      continue;
    }
    g.orient(from, to);
  }

  MeekReport report;
  result.cpdag = meek_close(std::move(g), ConflictPolicy::keep_undirected, &report);
  for (const auto& [a, b] : report.conflicts)
    result.warnings.push_back("Meek rules forced " + std::to_string(a) + " -- " + std::to_string(b) +
                              " both ways; left undirected");
  return result;
}

/// PC on data: correlations computed from the rows given, whose count is the
/// effective sample size of every test.
inline PcResult estimate_cpdag(const DataMatrix& data, const CiTestConfig& cfg, CorrelationSource source) {
  if (data.n() < 10) throw InputError("estimate_cpdag: need at least 10 rows");
  const auto corr = rank_correlation_matrix(data, source);
  return estimate_cpdag(corr, static_cast<double>(data.n()), cfg);
}

}  // namespace npnce
