#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical paths.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <unsupported/Eigen/SpecialFunctions>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// Free Gaussian packet width sigma(T) = sigma0 sqrt(1 + (hbar T / 2 m sigma0^2)^2).
inline double free_packet_width(double sigma0, double T, double hbar = 1.0, double mass = 1.0) {
  const double r = hbar * T / (2.0 * mass * sigma0 * sigma0);
  return sigma0 * std::sqrt(1.0 + r * r);
}

/// Standard deviation of a sampled periodic density about its circular mean,
/// measured on the window [mean - L/2, mean + L/2).
inline double circular_width(const std::vector<double>& x, const std::vector<double>& rho, double L) {
  double c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c += rho[i] * std::cos(2 * pi * x[i] / L);
    s += rho[i] * std::sin(2 * pi * x[i] / L);
  }
  const double mean = std::atan2(s, c) * L / (2 * pi);
  double m0 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = std::fmod(x[i] - mean + 1.5 * L, L) - 0.5 * L;
    m0 += rho[i];
    m2 += rho[i] * d * d;
  }
  return std::sqrt(m2 / m0);
}

/// Antiderivative of 1 - cos(2 pi x) on [0, 1]: the q-map of the sin^2 state.
inline double sin2_cumulative(double x) { return x - std::sin(2 * pi * x) / (2 * pi); }

/// Bisection for a monotone function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Mean of the density proportional to exp(-lambda x) on [0, 1], closed form.
inline double truncated_exponential_mean(double lambda) {
  if (std::abs(lambda) < 1e-6) return 0.5 - lambda / 12.0;
  return 1.0 / lambda - 1.0 / std::expm1(lambda);
}

/// Wrapped normal density on a circle of length L.
inline double wrapped_normal(double d, double sigma, double L) {
  double total = 0.0;
  for (int n = -50; n <= 50; ++n) {
    const double z = (d + n * L) / sigma;
    total += std::exp(-0.5 * z * z);
  }
  return total / (sigma * std::sqrt(2 * pi));
}

/// Exact log of n choose k via lgamma-free summation of logs.
inline double log_binomial(long n, long k) {
  double total = 0.0;
  for (long i = 1; i <= k; ++i) total += std::log(static_cast<double>(n - k + i)) - std::log(static_cast<double>(i));
  return total;
}

/// Upper tail of the chi-square distribution, Q(dof/2, stat/2).
inline double chi_square_sf(double stat, double dof) { return Eigen::numext::igammac(0.5 * dof, 0.5 * stat); }

/// Chi-square goodness of fit with bins of expected count below 5 merged
/// into their neighbour, scanning left to right. Returns {statistic, dof}.
inline std::pair<double, double> pooled_chi_square(const std::vector<double>& observed,
                                                   const std::vector<double>& expected) {
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += expected[i];
    if (e >= 5.0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 && !exp.empty()) {
    obs.back() += o;
    exp.back() += e;
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  return {stat, static_cast<double>(obs.size()) - 1.0};
}

/// KL(p || r) in nats for a count histogram against bin probabilities.
inline double histogram_kl(const std::vector<double>& counts, const std::vector<double>& probs) {
  double total = 0.0;
  for (double c : counts) total += c;
  double kl = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] > 0) kl += counts[i] / total * std::log(counts[i] / total / probs[i]);
  return kl;
}

}  // namespace oracle
