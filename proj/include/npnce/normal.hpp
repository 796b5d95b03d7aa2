#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "npnce/error.hpp"

namespace npnce {

/// A value on the latent standard-normal scale.
struct LatentValue {
  double z = 0.0;
};

/// Band used to keep smoothed CDF values away from 0 and 1 before mapping
/// them through the normal quantile; keeps |z| below about 4.75.
inline constexpr double kLatentClamp = 1e-6;

inline double std_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double std_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation, relative error below 1.15e-9.
inline double acklam_quantile(double u) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  constexpr double high = 1.0 - low;

  if (u < low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > high) {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of std_cdf on (0, 1): rational approximation followed by one
/// Newton step.
inline double std_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("std_quantile: argument " + std::to_string(u) + " outside (0, 1)");
  }
  double z = detail::acklam_quantile(u);
  // Residual taken on the smaller tail to avoid cancellation near 1.
  const double residual = z <= 0.0 ? std_cdf(z) - u : (1.0 - u) - std_cdf(-z);
  z -= residual / std_pdf(z);
  return z;
}

/// Maps a (possibly overshooting) smoothed probability to the latent scale.
inline LatentValue to_latent(double u) {
  if (std::isnan(u)) throw DomainError("to_latent: NaN probability");
  const double clamped = std::clamp(u, kLatentClamp, 1.0 - kLatentClamp);
  return LatentValue{std_quantile(clamped)};
}

}  // namespace npnce
