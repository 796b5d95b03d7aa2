#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "npnce/error.hpp"

namespace npnce {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double clamp(double x) const { return std::clamp(x, lo, hi); }
  double width() const { return hi - lo; }
};

/// Triweight kernel (35/32)(1 - u^2)^3 on [-1, 1]: symmetric, integrates to
/// one, and vanishes with its first two derivatives at the support edges.
namespace triweight {

inline double value(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double w = 1.0 - u * u;
  return 35.0 / 32.0 * w * w * w;
}

inline double derivative(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double w = 1.0 - u * u;
  return -105.0 / 16.0 * u * w * w;
}

inline double second_derivative(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double w = 1.0 - u * u;
  return -105.0 / 16.0 * w * (1.0 - 5.0 * u * u);
}

/// Integrated kernel, int_{-1}^{u} K.
inline double integral(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double u2 = u * u;
  return 0.5 + 35.0 / 32.0 * u * (1.0 - u2 + 0.6 * u2 * u2 - u2 * u2 * u2 / 7.0);
}

}  // namespace triweight

enum class KernelFamily { triweight };

/// How the CDF smoother weighs the step F_n = alpha + (j - 1)/n on
/// [x_(j-1), x_(j)]:
///   priestley_chao  (x_(j) - x_(j-1)) b^-1 K((x - x_(j))/b), the plain
///                   Riemann form;
///   gasser_muller   int over [x_(j-1), x_(j)] of b^-1 K((x - t)/b) dt, exact.
/// The Riemann form overshoots where spacings approach b (sparse tails).
enum class CdfRule { gasser_muller, priestley_chao };

inline const char* to_string(CdfRule r) { return r == CdfRule::gasser_muller ? "gasser-muller" : "priestley-chao"; }

struct KernelSpec {
  KernelFamily family = KernelFamily::triweight;
  double bandwidth_cdf = 0.0;
  double bandwidth_quantile = 0.0;
  CdfRule cdf_rule = CdfRule::gasser_muller;
};

/// Which denominator the CDF smoother uses for its step heights: the
/// original sample size n (default) or the retained count N.
enum class CdfWeights { original_count, retained_count };

inline constexpr std::size_t kMarginalGridSize = 501;

namespace detail {

// Linear interpolation on an equally spaced grid over `range`.
inline double interpolate(const std::vector<double>& grid, Interval range, double x) {
  const double pos = (x - range.lo) / range.width() * static_cast<double>(grid.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), grid.size() - 2);
  const double t = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
  return grid[k] + t * (grid[k + 1] - grid[k]);
}

}  // namespace detail

inline double sample_sd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

/// Rule-of-thumb bandwidths: 1.06 sd N^(-1/5) on the data scale and
/// 0.5 (1 - 2 alpha) N^(-1/5) on the probability scale.
inline KernelSpec default_kernel_spec(std::span<const double> column, double alpha) {
  const double shrink = std::pow(static_cast<double>(column.size()), -0.2);
  KernelSpec spec;
  spec.bandwidth_cdf = 1.06 * sample_sd(column) * shrink;
  spec.bandwidth_quantile = 0.5 * (1.0 - 2.0 * alpha) * shrink;
  return spec;
}

/// Value of a derivative estimate plus whether it was taken from the
/// nearest interior point instead of the requested one.
struct DerivativeEstimate {
  double value = 0.0;
  bool extended = false;
};

/// Kernel-smoothed marginal of one variable built from its N retained order
/// statistics. Immutable once fitted.
class MarginalFit {
 public:
  const std::vector<double>& sorted_values() const { return sorted_; }
  std::size_t n_total() const { return n_total_; }
  double alpha() const { return alpha_; }
  const KernelSpec& kernel() const { return kernel_; }
  CdfWeights weights() const { return weights_; }

  /// Range of the retained sample, where the CDF estimate is defined.
  Interval support() const { return {sorted_.front(), sorted_.back()}; }
  /// Bandwidth interior of the support, where the density estimate is valid.
  Interval interior() const { return {support().lo + kernel_.bandwidth_cdf, support().hi - kernel_.bandwidth_cdf}; }
  /// Probability band on which the quantile smoother is valid.
  Interval quantile_band() const {
    return {alpha_ + kernel_.bandwidth_quantile, 1.0 - alpha_ - kernel_.bandwidth_quantile};
  }

  /// Unmonotonized CDF smoother (step heights alpha + (j - 1)/n).
  double raw_cdf(double x) const { return cdf_sum(x, /*order=*/0); }
  double raw_cdf_derivative(double x) const { return cdf_sum(x, /*order=*/1); }
  double raw_quantile(double u) const { return quantile_sum(u, 0); }
  double raw_quantile_derivative(double u) const { return quantile_sum(u, 1); }

  double cdf(double x) const;
  double cdf_derivative(double x) const;
  double quantile(double u) const;
  double quantile_derivative(double u) const;

  const std::vector<double>& cdf_grid_values() const { return cdf_grid_; }
  const std::vector<double>& quantile_grid_values() const { return quantile_grid_; }

  friend MarginalFit fit_marginal(std::vector<double> column, std::size_t n_total, double alpha, KernelSpec kernel,
                                  CdfWeights weights);

 private:
  MarginalFit() = default;

  double step_height(std::size_t k) const {
    const double denom = weights_ == CdfWeights::original_count ? static_cast<double>(n_total_)
                                                                : static_cast<double>(sorted_.size());
    return alpha_ + static_cast<double>(k) / denom;
  }

  double cdf_sum(double x, int order) const {
    return kernel_.cdf_rule == CdfRule::priestley_chao ? riemann_sum(x, order) : interval_sum(x, order);
  }

  // sum_{j=2}^{N} (x_(j) - x_(j-1)) b^-(1+order) K^(order)((x - x_(j))/b) (alpha + (j-1)/n)
  double riemann_sum(double x, int order) const {
    const double b = kernel_.bandwidth_cdf;
    auto first = std::lower_bound(sorted_.begin() + 1, sorted_.end(), x - b);
    auto last = std::upper_bound(first, sorted_.end(), x + b);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const auto k = static_cast<std::size_t>(it - sorted_.begin());
      const double u = (x - *it) / b;
      const double kv = order == 0 ? triweight::value(u) : triweight::derivative(u);
      sum += (sorted_[k] - sorted_[k - 1]) * kv * step_height(k);
    }
    return order == 0 ? sum / b : sum / (b * b);
  }

  // sum_{j=2}^{N} (alpha + (j-1)/n) [G((x - x_(j-1))/b) - G((x - x_(j))/b)], G = int K,
  // and its x-derivative with K in place of G.
  double interval_sum(double x, int order) const {
    const double b = kernel_.bandwidth_cdf;
    auto first = std::lower_bound(sorted_.begin() + 1, sorted_.end(), x - b);
    const auto g = [order](double u) { return order == 0 ? triweight::integral(u) : triweight::value(u); };
    double sum = 0.0;
    for (auto it = first; it != sorted_.end() && *(it - 1) <= x + b; ++it) {
      const auto k = static_cast<std::size_t>(it - sorted_.begin());
      sum += step_height(k) * (g((x - sorted_[k - 1]) / b) - g((x - sorted_[k]) / b));
    }
    return order == 0 ? sum : sum / b;
  }

  // sum_{j=1}^{N} ((1 - 2 alpha)/N) b^-(1+order) K^(order)((u - u_j)/b) x_(j),
  // u_j = alpha + j (1 - 2 alpha)/N
  double quantile_sum(double u, int order) const {
    const double b = kernel_.bandwidth_quantile;
    const double n = static_cast<double>(sorted_.size());
    const double step = (1.0 - 2.0 * alpha_) / n;
    const double j_lo = std::max(1.0, std::ceil((u - b - alpha_) / step));
    const double j_hi = std::min(n, std::floor((u + b - alpha_) / step));
    double sum = 0.0;
    for (double j = j_lo; j <= j_hi; j += 1.0) {
      const double arg = (u - (alpha_ + j * step)) / b;
      const double kv = order == 0 ? triweight::value(arg) : triweight::derivative(arg);
      sum += kv * sorted_[static_cast<std::size_t>(j) - 1];
    }
    return order == 0 ? step * sum / b : step * sum / (b * b);
  }

  std::vector<double> sorted_;
  std::size_t n_total_ = 0;
  double alpha_ = 0.0;
  KernelSpec kernel_;
  CdfWeights weights_ = CdfWeights::original_count;
  std::vector<double> cdf_grid_;       // isotonized, on support()
  std::vector<double> quantile_grid_;  // isotonized, on quantile_band()
};

/// Fits the kernel CDF and quantile smoothers to one variable's retained
/// sample. Bandwidths of zero in `kernel` are replaced by the defaults.
inline MarginalFit fit_marginal(std::vector<double> column, std::size_t n_total, double alpha, KernelSpec kernel = {},
                                CdfWeights weights = CdfWeights::original_count) {
  if (column.size() < 10)
    throw InputError("fit_marginal: need at least 10 retained points, got " + std::to_string(column.size()));
  if (n_total < column.size()) throw InputError("fit_marginal: n_total smaller than the retained sample");
  if (!(alpha >= 0.0 && alpha < 0.25)) throw DomainError("fit_marginal: alpha must lie in [0, 0.25)");
  for (double v : column)
    if (!std::isfinite(v)) throw InputError("fit_marginal: non-finite value");
  if (!(sample_sd(column) > 0.0)) throw InputError("fit_marginal: zero-variance column");

  const KernelSpec defaults = default_kernel_spec(column, alpha);
  if (kernel.bandwidth_cdf <= 0.0) kernel.bandwidth_cdf = defaults.bandwidth_cdf;
  if (kernel.bandwidth_quantile <= 0.0) kernel.bandwidth_quantile = defaults.bandwidth_quantile;

  MarginalFit fit;
  std::sort(column.begin(), column.end());
  fit.sorted_ = std::move(column);
  fit.n_total_ = n_total;
  fit.alpha_ = alpha;
  fit.kernel_ = kernel;
  fit.weights_ = weights;

  if (!(fit.interior().lo < fit.interior().hi))
    throw InputError("fit_marginal: CDF bandwidth " + std::to_string(kernel.bandwidth_cdf) +
                     " leaves no interior on the sample range");
  if (!(fit.quantile_band().lo < 0.5 && fit.quantile_band().hi > 0.5))
    throw InputError("fit_marginal: quantile bandwidth " + std::to_string(kernel.bandwidth_quantile) +
                     " leaves no valid band around the median");

  const auto isotonize = [](std::vector<double>& grid) {
    for (std::size_t k = 1; k < grid.size(); ++k) grid[k] = std::max(grid[k], grid[k - 1]);
  };
  const Interval support = fit.support();
  fit.cdf_grid_.resize(kMarginalGridSize);
  for (std::size_t k = 0; k < kMarginalGridSize; ++k) {
    const double x = support.lo + support.width() * static_cast<double>(k) / static_cast<double>(kMarginalGridSize - 1);
    fit.cdf_grid_[k] = std::clamp(fit.raw_cdf(x), 0.0, 1.0);
  }
  isotonize(fit.cdf_grid_);

  const Interval band = fit.quantile_band();
  fit.quantile_grid_.resize(kMarginalGridSize);
  for (std::size_t k = 0; k < kMarginalGridSize; ++k) {
    const double u = band.lo + band.width() * static_cast<double>(k) / static_cast<double>(kMarginalGridSize - 1);
    fit.quantile_grid_[k] = fit.raw_quantile(u);
  }
  isotonize(fit.quantile_grid_);
  return fit;
}

/// Smoothed, monotone CDF estimate at x in the retained range.
inline double cdf_hat(const MarginalFit& fit, double x) {
  if (!fit.support().contains(x))
    throw DomainError("cdf_hat: x = " + std::to_string(x) + " outside the trimmed range");
  return detail::interpolate(fit.cdf_grid_values(), fit.support(), x);
}

/// Density estimate from the analytic derivative of the CDF smoother,
/// clipped at zero. Points in the boundary band take the nearest interior
/// value and are flagged.
inline DerivativeEstimate cdf_deriv_estimate(const MarginalFit& fit, double x) {
  if (!fit.support().contains(x))
    throw DomainError("cdf_deriv_hat: x = " + std::to_string(x) + " outside the trimmed range");
  const Interval interior = fit.interior();
  const double at = interior.clamp(x);
  return {std::max(0.0, fit.raw_cdf_derivative(at)), at != x};
}

inline double cdf_deriv_hat(const MarginalFit& fit, double x) { return cdf_deriv_estimate(fit, x).value; }

inline double quantile_hat(const MarginalFit& fit, double u) {
  const Interval band = fit.quantile_band();
  if (!band.contains(u)) throw DomainError("quantile_hat: u = " + std::to_string(u) + " outside the valid band");
  return detail::interpolate(fit.quantile_grid_values(), band, u);
}

inline double quantile_deriv_hat(const MarginalFit& fit, double u) {
  if (!fit.quantile_band().contains(u))
    throw DomainError("quantile_deriv_hat: u = " + std::to_string(u) + " outside the valid band");
  return std::max(0.0, fit.raw_quantile_derivative(u));
}

inline double MarginalFit::cdf(double x) const { return cdf_hat(*this, x); }
inline double MarginalFit::cdf_derivative(double x) const { return cdf_deriv_hat(*this, x); }
inline double MarginalFit::quantile(double u) const { return quantile_hat(*this, u); }
inline double MarginalFit::quantile_derivative(double u) const { return quantile_deriv_hat(*this, u); }

}  // namespace npnce
