#pragma once

// Real-argument Bessel functions J0, Y0 and the Hankel function H0^(1).
//
// Small arguments use the ascending power series (with the logarithmic
// term for Y0); large arguments use the Hankel asymptotic expansion.
// Both regimes hold |error| <= 1e-9 (absolute below the switch point,
// relative to the envelope above it).

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace aeroimg::specialfn {

using Complex = std::complex<double>;

// Above this point the asymptotic expansion's smallest term is below 1e-11.
inline constexpr double kAsymptoticSwitch = 12.0;

namespace detail {

inline void require_finite(double x, const char* fn) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(fn) + ": non-finite argument");
  }
}

// J0 and the series part of Y0 share the same terms (-1)^k (x^2/4)^k/(k!)^2.
struct SeriesPair {
  double j0;
  double y0_tail;  // sum_{k>=1} (-1)^(k+1) H_k t_k
};

inline SeriesPair ascending_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double harmonic = 0.0;
  double j0 = 1.0;
  double tail = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    j0 += term;
    tail -= harmonic * term;
    if (std::abs(term) * (1.0 + harmonic) < 1e-18) break;
  }
  return {j0, tail};
}

// Hankel asymptotic P0(x), Q0(x); summation stops at the smallest term.
inline void asymptotic_pq(double x, double& p, double& q) {
  p = 1.0;
  q = 0.0;
  double a = 1.0;  // a_k / x^k, sign folded in
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    a *= -(odd * odd) / (8.0 * k * x);
    const double mag = std::abs(a);
    if (mag > prev) break;
    prev = mag;
    // a_k carries (-1)^k from the product; P and Q alternate once more.
    if (k % 2 == 0) {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * a;
    } else {
      q += (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0) * a;
    }
    if (mag < 1e-17) break;
  }
}

inline void asymptotic_j0_y0(double x, double& j0, double& y0) {
  double p = 0.0;
  double q = 0.0;
  asymptotic_pq(x, p, q);
  const double s = std::sin(x);
  const double c = std::cos(x);
  // chi = x - pi/4
  const double cos_chi = (c + s) * std::numbers::sqrt2 * 0.5;
  const double sin_chi = (s - c) * std::numbers::sqrt2 * 0.5;
  const double amp = std::sqrt(2.0 / (std::numbers::pi * x));
  j0 = amp * (p * cos_chi - q * sin_chi);
  y0 = amp * (p * sin_chi + q * cos_chi);
}

}  // namespace detail

inline double bessel_j0(double x) {
  detail::require_finite(x, "bessel_j0");
  if (x < 0.0) throw std::domain_error("bessel_j0: negative argument");
  if (x <= kAsymptoticSwitch) return detail::ascending_series(x).j0;
  double j0 = 0.0;
  double y0 = 0.0;
  detail::asymptotic_j0_y0(x, j0, y0);
  return j0;
}

inline double bessel_y0(double x) {
  detail::require_finite(x, "bessel_y0");
  if (x <= 0.0) throw std::domain_error("bessel_y0: argument must be positive");
  if (x <= kAsymptoticSwitch) {
    const auto s = detail::ascending_series(x);
    constexpr double two_over_pi = 2.0 / std::numbers::pi;
    return two_over_pi * ((std::log(0.5 * x) + std::numbers::egamma) * s.j0 + s.y0_tail);
  }
  double j0 = 0.0;
  double y0 = 0.0;
  detail::asymptotic_j0_y0(x, j0, y0);
  return y0;
}

/// H0^(1)(x) = J0(x) + i Y0(x), x > 0.
inline Complex hankel1_0(double x) {
  detail::require_finite(x, "hankel1_0");
  if (x <= 0.0) throw std::domain_error("hankel1_0: argument must be positive");
  if (x <= kAsymptoticSwitch) {
    const auto s = detail::ascending_series(x);
    constexpr double two_over_pi = 2.0 / std::numbers::pi;
    const double y0 =
        two_over_pi * ((std::log(0.5 * x) + std::numbers::egamma) * s.j0 + s.y0_tail);
    return {s.j0, y0};
  }
  double j0 = 0.0;
  double y0 = 0.0;
  detail::asymptotic_j0_y0(x, j0, y0);
  return {j0, y0};
}

}  // namespace aeroimg::specialfn
