#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "npnce/dataset.hpp"
#include "npnce/marginals.hpp"
#include "npnce/normal.hpp"
#include "test_helpers.hpp"

using namespace npnce;
using npnce::testing::exponential_draws;
using npnce::testing::normal_draws;
using npnce::testing::uniform_draws;

namespace {

// Single-variable trimming at alpha followed by a fit on the retained values.
MarginalFit fit_trimmed(const std::vector<double>& column, double alpha, KernelSpec kernel = {},
                        CdfWeights weights = CdfWeights::original_count) {
  DataMatrix d;
  d.values = Eigen::Map<const Eigen::VectorXd>(column.data(), static_cast<Eigen::Index>(column.size()));
  d.names = {"X"};
  const TrimmedData t = trim(d, alpha);
  std::vector<double> kept;
  for (std::size_t r : t.rows) kept.push_back(column[r]);
  return fit_marginal(kept, column.size(), alpha, kernel, weights);
}

double simpson(const auto& f, double a, double b, int m) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Triweight, KernelValidity) {
  EXPECT_NEAR(simpson([](double u) { return triweight::value(u); }, -1.0, 1.0, 2000), 1.0, 1e-10);
  EXPECT_NEAR(simpson([](double u) { return u * triweight::value(u); }, -1.0, 1.0, 2000), 0.0, 1e-14);
  for (double u = 0.0; u <= 1.0; u += 0.05) {
    EXPECT_EQ(triweight::value(u), triweight::value(-u));
    EXPECT_EQ(triweight::derivative(u), -triweight::derivative(-u));
  }
  for (double e : {-1.0, 1.0}) {
    EXPECT_EQ(triweight::value(e), 0.0);
    EXPECT_EQ(triweight::derivative(e), 0.0);
    EXPECT_EQ(triweight::second_derivative(e), 0.0);
  }
  EXPECT_EQ(triweight::value(1.5), 0.0);
}

TEST(Triweight, DerivativesAndIntegralAgreeWithFiniteDifferences) {
  const double h = 1e-6;
  for (double u = -0.95; u < 0.96; u += 0.1) {
    EXPECT_NEAR((triweight::value(u + h) - triweight::value(u - h)) / (2 * h), triweight::derivative(u), 1e-7);
    EXPECT_NEAR((triweight::derivative(u + h) - triweight::derivative(u - h)) / (2 * h), triweight::second_derivative(u), 1e-6);
    EXPECT_NEAR(triweight::integral(u), simpson([](double t) { return triweight::value(t); }, -1.0, u, 2000), 1e-12);
  }
  EXPECT_EQ(triweight::integral(-1.0), 0.0);
  EXPECT_EQ(triweight::integral(1.0), 1.0);
}

TEST(FitMarginal, MedianOfNormalSample) {
  const auto x = normal_draws(1000, 1);
  const MarginalFit fit = fit_trimmed(x, 0.05);
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_NEAR(cdf_hat(fit, 0.5 * (sorted[499] + sorted[500])), 0.5, 0.05);
}

TEST(FitMarginal, Errors) {
  EXPECT_THROW(fit_marginal(std::vector<double>(50, 3.0), 50, 0.05), InputError);
  EXPECT_THROW(fit_marginal({1, 2, 3, 4, 5}, 5, 0.05), InputError);
  EXPECT_THROW(fit_marginal(uniform_draws(20, 2), 10, 0.05), InputError);
  EXPECT_THROW(fit_marginal(uniform_draws(20, 2), 20, 0.3), DomainError);
}

TEST(FitMarginal, GridInvariants) {
  const MarginalFit fit = fit_trimmed(exponential_draws(700, 3), 0.05);
  const auto& sorted = fit.sorted_values();
  EXPECT_TRUE(std::is_sorted(sorted.begin(), sorted.end()));
  EXPECT_LE(sorted.size(), fit.n_total());
  const auto& g = fit.cdf_grid_values();
  ASSERT_EQ(g.size(), kMarginalGridSize);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_GE(g[k], 0.0);
    EXPECT_LE(g[k], 1.0);
    if (k) {
      EXPECT_GE(g[k], g[k - 1]);
    }
  }
}

TEST(CdfHat, UniformMidpointAndBoundary) {
  const double alpha = 0.05;
  const MarginalFit fit = fit_trimmed(uniform_draws(5000, 4), alpha);
  EXPECT_NEAR(cdf_hat(fit, 0.5), 0.5, 0.03);
  EXPECT_LE(cdf_hat(fit, fit.support().lo), alpha + 0.05);
  EXPECT_THROW(cdf_hat(fit, fit.support().lo - 1e-3), DomainError);
  EXPECT_THROW(cdf_hat(fit, fit.support().hi + 1e-3), DomainError);
}

TEST(CdfHat, MonotoneOnDenseGrid) {
  for (CdfRule rule : {CdfRule::gasser_muller, CdfRule::priestley_chao}) {
    KernelSpec k;
    k.cdf_rule = rule;
    const MarginalFit fit = fit_trimmed(normal_draws(300, 5), 0.05, k);
    const Interval s = fit.support();
    double prev = cdf_hat(fit, s.lo);
    for (int i = 1; i < 200; ++i) {
      const double v = cdf_hat(fit, std::min(s.lo + s.width() * i / 199.0, s.hi));
      EXPECT_LE(prev, v);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(CdfHat, PriestleyChaoSumMatchesDirectFormula) {
  KernelSpec k;
  k.cdf_rule = CdfRule::priestley_chao;
  const std::size_t n = 400;
  const double alpha = 0.05;
  const MarginalFit fit = fit_trimmed(normal_draws(n, 6), alpha, k);
  const auto& xs = fit.sorted_values();
  const double b = fit.kernel().bandwidth_cdf;
  for (double x = fit.support().lo; x <= fit.support().hi; x += 0.173) {
    double direct = 0.0, slope = 0.0;
    for (std::size_t j = 2; j <= xs.size(); ++j) {
      const double w = (xs[j - 1] - xs[j - 2]) * (alpha + static_cast<double>(j - 1) / static_cast<double>(n));
      direct += w * triweight::value((x - xs[j - 1]) / b) / b;
      slope += w * triweight::derivative((x - xs[j - 1]) / b) / (b * b);
    }
    EXPECT_NEAR(fit.raw_cdf(x), direct, 1e-12);
    EXPECT_NEAR(fit.raw_cdf_derivative(x), slope, 1e-10);
  }
}

TEST(CdfHat, GasserMullerEqualsSmoothedStepFunction) {
  // Oracle: integral of b^-1 K((x - t)/b) F_n(t) over [x_(1), x_(N)], with
  // F_n = alpha + (j - 1)/n on [x_(j-1), x_(j)), by quadrature.
  const std::size_t n = 300;
  const double alpha = 0.05;
  const MarginalFit fit = fit_trimmed(normal_draws(n, 7), alpha);
  const auto& xs = fit.sorted_values();
  const double b = fit.kernel().bandwidth_cdf;
  for (double x : {-1.0, -0.2, 0.4, 1.1}) {
    double oracle = 0.0;
    for (std::size_t j = 2; j <= xs.size(); ++j) {
      const double height = alpha + static_cast<double>(j - 1) / static_cast<double>(n);
      if (xs[j - 1] > xs[j - 2])
        oracle += height * simpson([&](double t) { return triweight::value((x - t) / b) / b; }, xs[j - 2], xs[j - 1], 40);
    }
    EXPECT_NEAR(fit.raw_cdf(x), oracle, 1e-9) << x;
    const double h = 1e-5;
    EXPECT_NEAR(fit.raw_cdf_derivative(x), (fit.raw_cdf(x + h) - fit.raw_cdf(x - h)) / (2 * h), 1e-6);
  }
}

TEST(CdfHat, RetainedCountWeightsUseN) {
  const std::size_t n = 500;
  const double alpha = 0.05;
  const auto x = normal_draws(n, 8);
  const MarginalFit a = fit_trimmed(x, alpha, {}, CdfWeights::original_count);
  const MarginalFit b = fit_trimmed(x, alpha, {}, CdfWeights::retained_count);
  const double big_n = static_cast<double>(b.sorted_values().size());
  // Heights differ by (j - 1)(1/N - 1/n); the raw sums therefore differ in the interior.
  EXPECT_GT(b.raw_cdf(0.0), a.raw_cdf(0.0));
  // Brute force for the retained-count variant.
  const auto& xs = b.sorted_values();
  const double bw = b.kernel().bandwidth_cdf;
  double direct = 0.0;
  for (std::size_t j = 2; j <= xs.size(); ++j)
    direct += (alpha + static_cast<double>(j - 1) / big_n) *
              (triweight::integral((0.0 - xs[j - 2]) / bw) - triweight::integral((0.0 - xs[j - 1]) / bw));
  EXPECT_NEAR(b.raw_cdf(0.0), direct, 1e-12);
}

TEST(CdfDerivHat, NormalAndExponentialDensities) {
  const MarginalFit fn = fit_trimmed(normal_draws(5000, 9), 0.05);
  EXPECT_NEAR(cdf_deriv_hat(fn, 0.0), std_pdf(0.0), 0.06);
  const MarginalFit fe = fit_trimmed(exponential_draws(5000, 10), 0.05);
  EXPECT_NEAR(cdf_deriv_hat(fe, 1.0), std::exp(-1.0), 0.07);
}

TEST(CdfDerivHat, FiniteDifferenceAtMedian) {
  for (CdfRule rule : {CdfRule::gasser_muller, CdfRule::priestley_chao}) {
    KernelSpec k;
    k.cdf_rule = rule;
    auto x = normal_draws(2000, 11);
    const MarginalFit fit = fit_trimmed(x, 0.05, k);
    std::sort(x.begin(), x.end());
    const double med = 0.5 * (x[999] + x[1000]);
    const double h = fit.kernel().bandwidth_cdf / 10.0;
    const double fd = (cdf_hat(fit, med + h) - cdf_hat(fit, med - h)) / (2 * h);
    EXPECT_NEAR(cdf_deriv_hat(fit, med), fd, 0.1 * fd) << to_string(rule);
  }
}

TEST(CdfDerivHat, BoundaryBandAndDomain) {
  const MarginalFit fit = fit_trimmed(normal_draws(800, 12), 0.05);
  const Interval in = fit.interior();
  const auto edge = cdf_deriv_estimate(fit, fit.support().lo);
  EXPECT_TRUE(edge.extended);
  EXPECT_EQ(edge.value, cdf_deriv_estimate(fit, in.lo).value);
  EXPECT_FALSE(cdf_deriv_estimate(fit, 0.0).extended);
  EXPECT_THROW(cdf_deriv_hat(fit, fit.support().hi + 0.01), DomainError);
  for (double x = fit.support().lo; x <= fit.support().hi; x += 0.01) EXPECT_GE(cdf_deriv_hat(fit, x), 0.0);
}

TEST(QuantileHat, NormalAndExponentialMedians) {
  const MarginalFit fn = fit_trimmed(normal_draws(5000, 13), 0.05);
  EXPECT_NEAR(quantile_hat(fn, 0.5), 0.0, 0.05);
  const MarginalFit fe = fit_trimmed(exponential_draws(5000, 14), 0.05);
  EXPECT_NEAR(quantile_hat(fe, 0.5), std::log(2.0), 0.07);
}

TEST(QuantileHat, BandEdgeVersusOrderStatistic) {
  const double alpha = 0.05;
  const MarginalFit fit = fit_trimmed(normal_draws(5000, 15), alpha);
  const auto& xs = fit.sorted_values();
  const double big_n = static_cast<double>(xs.size());
  const double u = fit.quantile_band().lo + 1e-9;
  // Rank j with alpha + j (1 - 2 alpha)/N = u.
  const auto j = static_cast<std::size_t>(std::lround((u - alpha) * big_n / (1 - 2 * alpha)));
  const double gap = xs[j] - xs[j - 1];
  EXPECT_LE(std::abs(quantile_hat(fit, u) - xs[j - 1]), 3.0 * gap)
      << "estimate " << quantile_hat(fit, u) << " order statistic " << xs[j - 1] << " gap " << gap;
}

TEST(QuantileHat, DomainAndMonotonicity) {
  const MarginalFit fit = fit_trimmed(normal_draws(600, 16), 0.05);
  const Interval band = fit.quantile_band();
  EXPECT_THROW(quantile_hat(fit, band.lo - 1e-3), DomainError);
  EXPECT_THROW(quantile_deriv_hat(fit, band.hi + 1e-3), DomainError);
  double prev = quantile_hat(fit, band.lo);
  for (int k = 1; k <= 100; ++k) {
    const double v = quantile_hat(fit, band.lo + band.width() * k / 100.0);
    EXPECT_LE(prev, v);
    prev = v;
  }
}

TEST(QuantileHat, DirectFormula) {
  const double alpha = 0.05;
  const MarginalFit fit = fit_trimmed(exponential_draws(700, 17), alpha);
  const auto& xs = fit.sorted_values();
  const double big_n = static_cast<double>(xs.size());
  const double b = fit.kernel().bandwidth_quantile;
  for (double u : {0.3, 0.5, 0.71}) {
    double q = 0.0, dq = 0.0;
    for (std::size_t j = 1; j <= xs.size(); ++j) {
      const double arg = (u - (alpha + static_cast<double>(j) * (1 - 2 * alpha) / big_n)) / b;
      q += (1 - 2 * alpha) / big_n * triweight::value(arg) / b * xs[j - 1];
      dq += (1 - 2 * alpha) / big_n * triweight::derivative(arg) / (b * b) * xs[j - 1];
    }
    EXPECT_NEAR(fit.raw_quantile(u), q, 1e-12);
    EXPECT_NEAR(fit.raw_quantile_derivative(u), dq, 1e-10);
  }
}

TEST(QuantileDerivHat, InverseFunctionOracle) {
  const MarginalFit fn = fit_trimmed(normal_draws(5000, 18), 0.05);
  EXPECT_NEAR(quantile_deriv_hat(fn, 0.5), 1.0 / std_pdf(0.0), 0.4);
  const MarginalFit fe = fit_trimmed(exponential_draws(5000, 19), 0.05);
  EXPECT_NEAR(quantile_deriv_hat(fe, 0.5), 2.0, 0.35);
}

TEST(QuantileDerivHat, FiniteDifference) {
  const MarginalFit fit = fit_trimmed(normal_draws(3000, 20), 0.05);
  const double h = fit.kernel().bandwidth_quantile / 10.0;
  const double fd = (quantile_hat(fit, 0.5 + h) - quantile_hat(fit, 0.5 - h)) / (2 * h);
  EXPECT_NEAR(quantile_deriv_hat(fit, 0.5), fd, 0.1 * fd);
}

TEST(MarginalProperties, ConvergenceSweep) {
  std::vector<double> medians;
  for (std::size_t n : {200u, 1000u, 5000u}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const MarginalFit fit = fit_trimmed(normal_draws(n, 1000 + seed * 7 + n), 0.05);
      const Interval s = fit.support();
      double sup = 0.0;
      for (int k = 0; k <= 400; ++k) {
        const double x = std::min(s.lo + s.width() * k / 400.0, s.hi);
        sup = std::max(sup, std::abs(cdf_hat(fit, x) - std_cdf(x)));
      }
      errs.push_back(sup);
    }
    medians.push_back(npnce::testing::median(errs));
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(MarginalProperties, ScaleEquivariance) {
  const auto x = normal_draws(900, 21);
  const double c = 3.7;
  std::vector<double> cx;
  for (double v : x) cx.push_back(c * v);
  for (CdfRule rule : {CdfRule::gasser_muller, CdfRule::priestley_chao}) {
    KernelSpec k;
    k.cdf_rule = rule;
    const MarginalFit a = fit_trimmed(x, 0.05, k);
    KernelSpec kc = a.kernel();
    kc.bandwidth_cdf *= c;
    const MarginalFit b = fit_trimmed(cx, 0.05, kc);
    const Interval s = a.support();
    for (int i = 0; i <= 50; ++i) {
      const double v = s.lo + s.width() * i / 50.0;
      EXPECT_NEAR(cdf_hat(b, std::clamp(c * v, b.support().lo, b.support().hi)), cdf_hat(a, v), 1e-8);
    }
  }
}
