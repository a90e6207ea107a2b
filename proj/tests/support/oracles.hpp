// Apache License, Version 2.0, refer to LICENSE.txt
//
// Test-only reference computations. Nothing here calls into the library's
// density or approximation code; these are the independent routes the unit
// and acceptance tests compare against.

#ifndef RECSURV_TESTS_ORACLES_HPP
#define RECSURV_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Standard error of the mean of an autocorrelated series by non-overlapping
// batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> bm(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += x[b * len + k];
    bm[b] = s / static_cast<double>(len);
  }
  return std::sqrt(variance(bm) / static_cast<double>(batches));
}

inline double iid_se(const std::vector<double>& x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Asymptotic p-value of the KS statistic with Stephens' small-sample
// correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double t = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double chi_square_sf(double stat, double dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

// Monte Carlo estimate of P(sum_j exp(Y_j) <= s) for the Gaussian AR(1) chain
// Y_1 = mu + e_1, Y_j = mu + m2 (Y_{j-1} - mu) + e_j, e_j ~ N(0, sigma2).
inline double mc_sum_cdf(double mu, double m2, double sigma2, int count, double s, long draws,
                         unsigned long seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(sigma2));
  long hits = 0;
  for (long d = 0; d < draws; ++d) {
    double dev = 0.0;
    double total = 0.0;
    for (int j = 0; j < count; ++j) {
      dev = m2 * dev + z(eng);
      total += std::exp(mu + dev);
    }
    hits += total <= s;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

// Brute-force first two moments of T_N via the same chain.
inline std::pair<double, double> mc_sum_moments(double mu, double m2, double sigma2, int count,
                                                long draws, unsigned long seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(sigma2));
  double s1 = 0.0;
  double s2 = 0.0;
  for (long d = 0; d < draws; ++d) {
    double dev = 0.0;
    double total = 0.0;
    for (int j = 0; j < count; ++j) {
      dev = m2 * dev + z(eng);
      total += std::exp(mu + dev);
    }
    s1 += total;
    s2 += total * total;
  }
  return {s1 / draws, s2 / draws};
}

// Exhaustive Binder scan over sampled label vectors: for every sample k the
// loss sum_{i<j} |S 1(same in k) - #samples with i, j together| is computed
// from scratch in integers. Returns the earliest minimizing index and its
// loss divided by S.
inline std::pair<std::size_t, double> binder_bruteforce(
    const std::vector<std::vector<std::size_t>>& samples) {
  const long total = static_cast<long>(samples.size());
  const std::size_t n = samples.front().size();
  std::size_t best = 0;
  long best_loss = -1;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    long loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        long together = 0;
        for (const auto& other : samples) together += other[i] == other[j];
        const long same = samples[k][i] == samples[k][j] ? total : 0;
        loss += std::abs(same - together);
      }
    }
    if (best_loss < 0 || loss < best_loss) {
      best_loss = loss;
      best = k;
    }
  }
  return {best, static_cast<double>(best_loss) / static_cast<double>(total)};
}

// Same-cluster relation of two label vectors.
inline bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace oracle

#endif
