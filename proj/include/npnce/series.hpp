#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "npnce/error.hpp"
#include "npnce/graph.hpp"

namespace npnce {

/// Known latent structure for evaluating the exact series form of a
/// nonparanormal causal effect. Testing facility: every ingredient is
/// supplied, nothing is estimated.
struct SeriesSpec {
  /// Latent correlation matrix (positive definite, unit diagonal).
  Eigen::MatrixXd sigma;
  /// Index of the response in `sigma`.
  Node target = 0;
  /// k -> f_y^(k)(z0), k >= 1.
  std::function<double(int)> fy_derivative;
  /// x -> f_i^-1(x), the latent score of the cause.
  std::function<double(double)> fi_inverse;
  /// x -> (f_i^-1)'(x).
  std::function<double(double)> fi_inverse_derivative;
  double z0 = 0.0;
  int k_max = 20;
};

inline constexpr int kSeriesMaxOrder = 30;
inline constexpr double kSeriesCauchyTol = 1e-6;

struct SeriesEvaluation {
  double value = 0.0;
  /// Partial sums S_1..S_kmax (before the (f_i^-1)' factor).
  std::vector<double> partial_sums;
  double beta_i = 0.0;
  double residual_variance = 0.0;
};

namespace detail {

inline double double_factorial_odd(int m) {  // (m-1)!! for even m, 1 for m <= 0
  double out = 1.0;
  for (int k = m - 1; k > 1; k -= 2) out *= k;
  return out;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int t = 1; t <= k; ++t) out = out * (n - k + t) / t;
  return out;
}

}  // namespace detail

/// Evaluates the triple series for CE(Y | X_i = x) truncated at k_max, with
/// (beta_i, beta_pa) = Sigma_{y,S} Sigma_{S,S}^-1 for S = (i, pa), residual
/// variance 1 - Sigma_{y,S} Sigma_{S,S}^-1 Sigma_{S,y}, and Gaussian moments
/// E[(beta_pa' Z_pa)^m] = v^(m/2) (m-1)!! for even m.
/// Throws EstimationError when the last two increments exceed 1e-6
/// (checked for k_max >= 3).
inline SeriesEvaluation series_evaluate(const SeriesSpec& spec, Node i, const std::vector<Node>& pa, double x_i) {
  const auto p = static_cast<std::size_t>(spec.sigma.rows());
  if (spec.sigma.cols() != spec.sigma.rows()) throw InputError("series_oracle: sigma not square");
  if (spec.k_max < 1 || spec.k_max > kSeriesMaxOrder) throw InputError("series_oracle: k_max must lie in [1, 30]");
  if (spec.target >= p || i >= p || i == spec.target) throw InputError("series_oracle: invalid cause/target");
  for (Node k : pa)
    if (k >= p || k == i || k == spec.target) throw InputError("series_oracle: invalid parent index");
  if (!spec.fy_derivative || !spec.fi_inverse || !spec.fi_inverse_derivative)
    throw InputError("series_oracle: missing marginal functions");
  if (((spec.sigma.diagonal().array() - 1.0).abs() > 1e-12).any())
    throw InputError("series_oracle: sigma must have unit diagonal");
  if (Eigen::LLT<Eigen::MatrixXd>(spec.sigma).info() != Eigen::Success)
    throw EstimationError("series_oracle: sigma is not positive definite");

  std::vector<Node> s{i};
  s.insert(s.end(), pa.begin(), pa.end());
  const auto m = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd sss(m, m);
  Eigen::VectorXd sys(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    sys(a) = spec.sigma(static_cast<Eigen::Index>(spec.target), static_cast<Eigen::Index>(s[static_cast<std::size_t>(a)]));
    for (Eigen::Index b = 0; b < m; ++b)
      sss(a, b) = spec.sigma(static_cast<Eigen::Index>(s[static_cast<std::size_t>(a)]),
                             static_cast<Eigen::Index>(s[static_cast<std::size_t>(b)]));
  }
  const Eigen::VectorXd beta = sss.llt().solve(sys);
  const double explained = sys.dot(beta);
  const double resid_var = 1.0 - explained;
  const double beta_i = beta(0);
  const Eigen::VectorXd beta_pa = beta.tail(m - 1);
  const Eigen::MatrixXd spa = sss.bottomRightCorner(m - 1, m - 1);
  const double v = m > 1 ? beta_pa.dot(spa * beta_pa) : 0.0;

  const auto moment = [&](int order) {
    if (order == 0) return 1.0;
    if (order % 2 == 1) return 0.0;
    return std::pow(v, order / 2) * detail::double_factorial_odd(order);
  };

  const double z_i = spec.fi_inverse(x_i);
  const double shift = -spec.z0 + beta_i * z_i;

  SeriesEvaluation out;
  out.beta_i = beta_i;
  out.residual_variance = resid_var;
  double total = 0.0;
  double k_factorial = 1.0;
  for (int k = 1; k <= spec.k_max; ++k) {
    k_factorial *= k;
    const double coef = spec.fy_derivative(k) / k_factorial;
    double inner = 0.0;
    for (int r = 0; r <= (k - 1) / 2; ++r) {
      const double even_part = detail::binomial(k, 2 * r) * detail::double_factorial_odd(2 * r) * std::pow(resid_var, r);
      for (int t = 1; t <= k - 2 * r; ++t) {
        inner += detail::binomial(k - 2 * r, t) * even_part * t * beta_i * std::pow(shift, t - 1) * moment(k - 2 * r - t);
      }
    }
    total += coef * inner;
    out.partial_sums.push_back(total);
  }

  if (spec.k_max >= 3) {
    const auto& ps = out.partial_sums;
    const double last = ps.back();
    const double tol = kSeriesCauchyTol * std::max(1.0, std::abs(last));
    if (std::abs(last - ps[ps.size() - 2]) > tol || std::abs(last - ps[ps.size() - 3]) > tol)
      throw EstimationError("series_oracle: partial sums not settled at k_max = " + std::to_string(spec.k_max));
  }
  out.value = total * spec.fi_inverse_derivative(x_i);
  return out;
}

inline double series_oracle(const SeriesSpec& spec, Node i, const std::vector<Node>& pa, double x_i) {
  return series_evaluate(spec, i, pa, x_i).value;
}

/// Effect when only the response is normal, Y ~ N(mu, sigma_y^2):
/// sigma_y * beta_i * (f_i^-1)'(x).
inline double corollary_effect(double sigma_y, double beta_i, double fi_inv_deriv_at_x) {
  if (!(sigma_y > 0.0)) throw DomainError("corollary_effect: sigma_y must be positive");
  return sigma_y * beta_i * fi_inv_deriv_at_x;
}

}  // namespace npnce
