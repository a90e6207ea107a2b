// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_MODEL_HPP
#define RECSURV_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "recsurv/data.hpp"

namespace recsurv {

// Population-level parameters.
struct Globals {
  std::vector<double> beta;   // covariate effects on log gap times
  std::vector<double> gamma;  // covariate effects on log survival
  double sigma2 = 1.0;        // gap-time innovation variance
  double eta2 = 1.0;          // log-survival variance
  double r = 1.0;             // negative-binomial shape
  double lambda = 1.0;        // negative-binomial mean
  double M = 1.0;             // Dirichlet-process concentration

  friend bool operator==(const Globals&, const Globals&) = default;
};

// Subject-level frailty: (m1, m2) drive the AR(1) gap process, delta shifts
// log survival. Cluster atoms are values of this type.
struct RandomEffect {
  double m1 = 0.0;
  double m2 = 0.0;
  double delta = 0.0;

  friend bool operator==(const RandomEffect&, const RandomEffect&) = default;
};

// Fixed prior constants. Gamma priors use the (shape, rate) convention;
// Inverse-Gamma priors are Inv-Gamma(nu/2, nu * s0 / 2).
//
// The variance priors default to nu = 4.02, s0 = 1.01 / 2.01, which gives a
// prior mean of one and variance of 100.
struct Hyperparams {
  double sigma2_beta = 100.0;
  double sigma2_gamma = 100.0;
  double sigma2_m = 100.0;
  double sigma2_delta = 100.0;
  double nu_sigma2 = 4.02;
  double sigma2_0 = 2.02 / 4.02;
  double nu_eta2 = 4.02;
  double eta2_0 = 2.02 / 4.02;
  double a_M = 1.0;
  double b_M = 1.0;
  double a_r = 1.0;
  double b_r = 1.0;
  double a_lambda = 1.0;
  double b_lambda = 0.1;

  void validate() const {
    const std::pair<const char*, double> fields[] = {
        {"sigma2_beta", sigma2_beta}, {"sigma2_gamma", sigma2_gamma}, {"sigma2_m", sigma2_m},
        {"sigma2_delta", sigma2_delta}, {"nu_sigma2", nu_sigma2}, {"sigma2_0", sigma2_0},
        {"nu_eta2", nu_eta2}, {"eta2_0", eta2_0}, {"a_M", a_M}, {"b_M", b_M}, {"a_r", a_r},
        {"b_r", b_r}, {"a_lambda", a_lambda}, {"b_lambda", b_lambda}};
    for (const auto& [name, value] : fields) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string("hyperparameter ") + name +
                                    " must be positive and finite");
      }
    }
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// ---------------------------------------------------------------------------
// Elementary log densities

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

inline double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double inv_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -INFINITY;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double dot(std::span<const double> x, std::span<const double> coef) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * coef[k];
  return s;
}

// log Phi(z), accurate across the whole real line. Uses erfc for the lower
// tail down to z = -20 and the asymptotic Mills-ratio series beyond.
inline double log_normal_cdf(double z) {
  if (std::isnan(z)) return z;
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z > -20.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  const double z2 = z * z;
  const double inv = 1.0 / z2;
  const double series =
      1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

// Upper-tail probability 1 - Phi(z) without cancellation.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Phi^{-1}(p) for p in (0, 1).
inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// z such that 1 - Phi(z) = q, for q in (0, 1).
inline double normal_upper_quantile(double q) {
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

// ---------------------------------------------------------------------------
// Model components

// Negative binomial with shape r and mean lambda; success probability
// r / (r + lambda). Support starts at zero.
inline double nb_log_pmf(long n, double r, double lambda) {
  if (n < 0) return -INFINITY;
  const double dn = static_cast<double>(n);
  const double log_total = std::log(r + lambda);
  return std::lgamma(dn + r) - std::lgamma(r) - std::lgamma(dn + 1.0) +
         r * (std::log(r) - log_total) + (n == 0 ? 0.0 : dn * (std::log(lambda) - log_total));
}

// log f(Y | ...) for the AR(1) log-gap process with mean x'beta + m1. An
// empty gap vector contributes the constant log 1 = 0.
inline double loggap_logdensity(std::span<const double> gaps, std::span<const double> x,
                                std::span<const double> beta, const RandomEffect& re,
                                double sigma2) {
  if (gaps.empty()) return 0.0;
  const double mu = dot(x, beta) + re.m1;
  const double n = static_cast<double>(gaps.size());
  double ss = 0.0;
  double prev = 0.0;  // deviation of the previous gap from mu
  for (double y : gaps) {
    const double dev = y - mu;
    const double resid = dev - re.m2 * prev;
    ss += resid * resid;
    prev = dev;
  }
  return -n * kLogSqrt2Pi - 0.5 * n * std::log(sigma2) - 0.5 * ss / sigma2;
}

// Log-normal log-density of the survival time with log-scale mean
// x'gamma + delta and log-scale variance eta2.
inline double logsurv_logdensity(double survival, std::span<const double> x,
                                 std::span<const double> gamma, const RandomEffect& re,
                                 double eta2) {
  if (!(survival > 0.0)) {
    throw std::domain_error("logsurv_logdensity: survival time must be positive");
  }
  const double log_s = std::log(survival);
  return normal_logpdf(log_s, dot(x, gamma) + re.delta, eta2) - log_s;
}

struct LogNormalParams {
  double mu = 0.0;
  double s2 = 0.0;
};

// Log-normal approximation to T_N = sum_j exp(Y_j) under the AR(1) Gaussian
// law, matching E[T] and E[T^2] with the full covariance of the chain.
// Moment sums are accumulated in log space; non-finite variances throw.
inline LogNormalParams fenton_wilkinson(double mu, double m2, double sigma2, long count) {
  if (count < 1) throw std::invalid_argument("fenton_wilkinson: need at least one gap");
  if (count == 1) return {mu, sigma2};
  const auto n = static_cast<std::size_t>(count);

  thread_local std::vector<double> var;
  var.resize(n);
  const double m2sq = m2 * m2;
  var[0] = sigma2;
  for (std::size_t j = 1; j < n; ++j) var[j] = sigma2 + m2sq * var[j - 1];
  if (!std::isfinite(var[n - 1])) {
    throw std::overflow_error("fenton_wilkinson: gap variance overflow (m2 = " +
                              std::to_string(m2) + ", N = " + std::to_string(count) + ")");
  }

  // First moment: log sum_j exp(v_j / 2).
  double max1 = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) max1 = std::max(max1, 0.5 * var[j]);
  double sum1 = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum1 += std::exp(0.5 * var[j] - max1);
  const double log_m1 = max1 + std::log(sum1);

  // Second moment: sum_{j,k} exp((v_j + v_k) / 2 + m2^{|j-k|} v_min(j,k)).
  // The exponent is largest on the diagonal or where the covariance peaks, so
  // one pass finds the shift and a second accumulates.
  double max2 = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) {
    double pw = 1.0;
    for (std::size_t k = j; k < n; ++k) {
      max2 = std::max(max2, 0.5 * (var[j] + var[k]) + pw * var[j]);
      pw *= m2;
    }
  }
  double sum2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum2 += std::exp(2.0 * var[j] - max2);
    double pw = m2;
    for (std::size_t k = j + 1; k < n; ++k) {
      sum2 += 2.0 * std::exp(0.5 * (var[j] + var[k]) + pw * var[j] - max2);
      pw *= m2;
    }
  }
  const double log_m2 = max2 + std::log(sum2);

  double s2 = log_m2 - 2.0 * log_m1;
  if (!std::isfinite(s2)) throw std::overflow_error("fenton_wilkinson: moment overflow");
  s2 = std::max(s2, 1e-300);
  return {mu + log_m1 - 0.5 * s2, s2};
}

inline LogNormalParams fenton_wilkinson(std::span<const double> x, std::span<const double> beta,
                                        const RandomEffect& re, double sigma2, long count) {
  return fenton_wilkinson(dot(x, beta) + re.m1, re.m2, sigma2, count);
}

// Approximate log P(T_N <= S) under the unconstrained product law, treating
// T_N as log-normal (Fenton-Wilkinson) and independent of S. Zero for N = 0.
inline double log_normconst(std::span<const double> x, std::span<const double> beta,
                            std::span<const double> gamma, const RandomEffect& re, double sigma2,
                            double eta2, long count) {
  if (count <= 0) return 0.0;
  const LogNormalParams total = fenton_wilkinson(x, beta, re, sigma2, count);
  const double mu_s = dot(x, gamma) + re.delta;
  return log_normal_cdf((mu_s - total.mu) / std::sqrt(total.s2 + eta2));
}

// log p(Y, S | N, ...) including the truncation to T_N <= S and its
// normalization constant. Regions where the moment approximation overflows
// are given zero density.
inline double log_joint(std::span<const double> gaps, double survival, std::span<const double> x,
                        const Globals& g, const RandomEffect& re) {
  if (total_time(gaps) > survival) return -INFINITY;
  const long count = static_cast<long>(gaps.size());
  double log_c = 0.0;
  try {
    log_c = log_normconst(x, g.beta, g.gamma, re, g.sigma2, g.eta2, count);
  } catch (const std::overflow_error&) {
    return -INFINITY;
  }
  return loggap_logdensity(gaps, x, g.beta, re, g.sigma2) +
         logsurv_logdensity(survival, x, g.gamma, re, g.eta2) - log_c;
}

// log p(globals) under the independent priors.
inline double log_prior(const Globals& g, const Hyperparams& h) {
  double lp = 0.0;
  for (double b : g.beta) lp += normal_logpdf(b, 0.0, h.sigma2_beta);
  for (double c : g.gamma) lp += normal_logpdf(c, 0.0, h.sigma2_gamma);
  lp += inv_gamma_logpdf(g.sigma2, 0.5 * h.nu_sigma2, 0.5 * h.nu_sigma2 * h.sigma2_0);
  lp += inv_gamma_logpdf(g.eta2, 0.5 * h.nu_eta2, 0.5 * h.nu_eta2 * h.eta2_0);
  lp += gamma_logpdf(g.r, h.a_r, h.b_r);
  lp += gamma_logpdf(g.lambda, h.a_lambda, h.b_lambda);
  lp += gamma_logpdf(g.M, h.a_M, h.b_M);
  return lp;
}

// log G_0(re): N2(0, sigma2_m I) x N(0, sigma2_delta).
inline double log_base_measure(const RandomEffect& re, const Hyperparams& h) {
  return normal_logpdf(re.m1, 0.0, h.sigma2_m) + normal_logpdf(re.m2, 0.0, h.sigma2_m) +
         normal_logpdf(re.delta, 0.0, h.sigma2_delta);
}

// Inverse-Gamma (nu/2, nu*s0/2) hyperparameters with the given prior mean and
// variance; requires variance > 0.
inline std::pair<double, double> inv_gamma_from_moments(double mean, double variance) {
  const double shape = 2.0 + mean * mean / variance;
  const double scale = mean * (shape - 1.0);
  const double nu = 2.0 * shape;
  return {nu, 2.0 * scale / nu};
}

}  // namespace recsurv

#endif
