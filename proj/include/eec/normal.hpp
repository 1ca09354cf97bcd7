#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace eec {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;  // 1/sqrt(2 pi)

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Upper tail P{Z >= z}, accurate in relative terms far into the tail.
inline double norm_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Mills ratio P{Z >= z} / phi(z) = integral_0^inf exp(-y^2/2 - z y) dy.
inline double mills_ratio(double z) {
  if (z <= 30.0) return norm_sf(z) / norm_pdf(z);
  // continued fraction 1/(z+ 1/(z+ 2/(z+ ...))), evaluated backwards
  double tail = z;
  for (int k = 60; k >= 1; --k) tail = z + k / tail;
  return 1.0 / tail;
}

/// log of mills_ratio, finite for very negative z where the ratio overflows.
inline double log_mills_ratio(double z) {
  if (z >= -30.0) return std::log(mills_ratio(z));
  return 0.5 * z * z + std::log(norm_sf(z) / kInvSqrt2Pi);
}

/// Inverse of norm_cdf (Wichura's AS 241, refined by one Newton step).
inline double norm_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double q = p - 0.5;
  double x;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q *
        (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
             45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
          133.14166789178437745) * r + 3.387132872796366608) /
        (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
             21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
          42.313330701600911252) * r + 1.0);
  } else {
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r + 4.6303378461565452959) * r +
           1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r + 2.05319162663775882187) * r +
           1.0);
    } else {
      r -= 5.0;
      x = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r + 5.4637849111641143699) * r +
           6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }
  // one Newton step against the erfc-based cdf, on the smaller tail
  const double pdf = norm_pdf(x);
  if (pdf > 0.0) {
    const double resid = x < 0 ? norm_cdf(x) - p : (1.0 - p) - norm_sf(x);
    x -= resid / pdf;
  }
  return x;
}

/// Inverse of the upper tail: returns z with P{Z >= z} = q.
inline double norm_sf_inverse(double q) { return -norm_quantile(q); }

}  // namespace eec
