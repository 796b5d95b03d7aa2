#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "npnce/normal.hpp"

using namespace npnce;

TEST(StdPdf, ClosedFormValues) {
  EXPECT_NEAR(std_pdf(0.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(std_pdf(1.0), 0.24197072451914337, 1e-15);
  EXPECT_EQ(std_pdf(-1.0), std_pdf(1.0));
  for (double z = -6.0; z <= 6.0; z += 0.37)
    EXPECT_NEAR(std_pdf(z), std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI), 1e-14);
}

TEST(StdCdf, ReferenceValues) {
  // Reference values from an independent implementation (SciPy).
  const std::vector<std::pair<double, double>> ref = {
      {-8.0, 6.22096057427174e-16},  {-5.0, 2.866515718791933e-07}, {-2.5, 0.006209665325776132},
      {-1.0, 0.15865525393145707},   {0.3, 0.6179114221889526},     {1.0, 0.8413447460685429},
      {2.5, 0.9937903346742238},     {5.0, 0.9999997133484281},     {8.0, 0.9999999999999993}};
  for (const auto& [z, p] : ref) EXPECT_NEAR(std_cdf(z), p, 1e-12) << z;
  EXPECT_EQ(std_cdf(0.0), 0.5);
  EXPECT_NEAR(std_cdf(1.959964), 0.975, 1e-6);
}

TEST(StdCdf, Symmetry) {
  for (double z = -8.0; z <= 8.0; z += 0.25) EXPECT_NEAR(std_cdf(z) + std_cdf(-z), 1.0, 1e-14);
}

TEST(StdCdf, MatchesIntegratedDensity) {
  // Composite Simpson of std_pdf from -12 to z.
  for (double z : {-3.0, -1.2, 0.0, 0.8, 2.2}) {
    const int m = 20000;
    const double a = -12.0, h = (z - a) / m;
    double s = std_pdf(a) + std_pdf(z);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * std_pdf(a + k * h);
    EXPECT_NEAR(std_cdf(z), s * h / 3.0, 1e-12) << z;
  }
}

TEST(StdQuantile, ReferenceValues) {
  const std::vector<std::pair<double, double>> ref = {
      {1e-8, -5.612001244174789},  {1e-4, -3.7190164854556804}, {0.025, -1.9599639845400545},
      {0.3, -0.5244005127080409},  {0.7, 0.5244005127080407},   {0.975, 1.959963984540054},
      {1 - 1e-4, 3.719016485455709}};
  for (const auto& [u, z] : ref) EXPECT_NEAR(std_quantile(u), z, 1e-9) << u;
  EXPECT_NEAR(std_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(std_quantile(0.975), 1.959964, 1e-5);
}

TEST(StdQuantile, RoundTrip) {
  EXPECT_NEAR(std_quantile(std_cdf(2.5)), 2.5, 1e-9);
  for (double u : {1e-8, 1e-6, 1e-3, 0.01, 0.2, 0.5, 0.77, 0.99, 1 - 1e-6, 1 - 1e-8})
    EXPECT_LT(std::abs(std_cdf(std_quantile(u)) - u), 1e-10) << u;
  for (int k = 1; k < 1000; ++k) {
    const double u = k / 1000.0;
    EXPECT_LT(std::abs(std_cdf(std_quantile(u)) - u), 1e-10) << u;
  }
}

TEST(StdQuantile, RejectsOutsideUnitInterval) {
  EXPECT_THROW(std_quantile(0.0), DomainError);
  EXPECT_THROW(std_quantile(1.0), DomainError);
  EXPECT_THROW(std_quantile(-0.1), DomainError);
  EXPECT_THROW(std_quantile(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST(ToLatent, ClampsIntoBand) {
  EXPECT_NEAR(to_latent(0.5).z, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(to_latent(1.2).z, std_quantile(1.0 - 1e-6));
  EXPECT_DOUBLE_EQ(to_latent(-0.3).z, std_quantile(1e-6));
  EXPECT_NEAR(to_latent(1.2).z, 4.753424308817087, 1e-8);
  EXPECT_NEAR(to_latent(0.975).z, 1.96, 1e-3);
}

TEST(NormalProperties, StrictMonotonicity) {
  double prev = std_cdf(-8.0);
  for (double z = -7.99; z <= 8.0; z += 0.01) {
    const double c = std_cdf(z);
    if (z < 8.0 - 1e-9 && c < 1.0 - 1e-15) {
      EXPECT_GT(c, prev) << z;
    }
    prev = c;
  }
  double q = std_quantile(1e-9);
  for (int k = 1; k < 10000; ++k) {
    const double next = std_quantile(k / 10000.0);
    EXPECT_GT(next, q);
    q = next;
  }
}

TEST(NormalProperties, DerivativeIdentity) {
  const double h = 1e-5;
  for (double z = -6.0; z <= 6.0; z += 0.1)
    EXPECT_NEAR((std_cdf(z + h) - std_cdf(z - h)) / (2 * h), std_pdf(z), 1e-6) << z;
}
