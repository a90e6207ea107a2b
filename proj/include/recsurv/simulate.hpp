// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_SIMULATE_HPP
#define RECSURV_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsurv/data.hpp"
#include "recsurv/model.hpp"
#include "recsurv/rng.hpp"

namespace recsurv {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulationConfig {
  std::size_t L = 150;
  std::size_t q = 2;
  // Cluster h gets m = (h, 0.8 (h - 2)) and delta = h + 4, h = 1, 2, 3.
  std::vector<RandomEffect> cluster_atoms{{1.0, -0.8, 5.0}, {2.0, 0.0, 6.0}, {3.0, 0.8, 7.0}};
  std::vector<double> beta{-1.0, 1.0};
  std::vector<double> gamma{-1.0, 1.0};
  double r = 1.0;
  double lambda = 7.0;
  double sigma2 = 1.0;
  double eta2 = 1.0;
  double censor_rate = 0.0;
  std::uint64_t seed = 1;
  long max_attempts = 1000000;

  void validate() const {
    if (L == 0) throw std::invalid_argument("simulation: L must be positive");
    if (q == 0) throw std::invalid_argument("simulation: q must be positive");
    if (cluster_atoms.empty()) throw std::invalid_argument("simulation: no cluster atoms");
    if (beta.size() != q || gamma.size() != q) {
      throw std::invalid_argument("simulation: beta and gamma must have length q");
    }
    if (!(r > 0.0) || !(lambda > 0.0) || !(sigma2 > 0.0) || !(eta2 > 0.0)) {
      throw std::invalid_argument("simulation: r, lambda, sigma2 and eta2 must be positive");
    }
    if (!(censor_rate >= 0.0 && censor_rate < 1.0)) {
      throw std::invalid_argument("simulation: censor_rate must lie in [0, 1)");
    }
    if (max_attempts < 1) throw std::invalid_argument("simulation: max_attempts must be positive");
  }

  Globals globals() const {
    Globals g;
    g.beta = beta;
    g.gamma = gamma;
    g.sigma2 = sigma2;
    g.eta2 = eta2;
    g.r = r;
    g.lambda = lambda;
    return g;
  }
};

// Complete latent trajectory of one subject.
struct Trajectory {
  LogGaps gaps;
  double survival = 0.0;
};

struct GroundTruth {
  Globals globals;
  std::vector<RandomEffect> atoms;
  std::vector<std::size_t> assignments;
  std::vector<long> counts;
  std::vector<Trajectory> trajectories;
};

struct SimulatedData {
  Dataset data;  // fully observed: censor_time = S_i, all survival observed
  GroundTruth truth;
};

namespace detail {

// Mode of the constrained joint on the log scale, used to centre the proposal
// of draw_constrained_joint. With z = Y - mu and Q the AR(1) precision, it
// minimizes the convex
//   F(z) = z'Qz / 2 + max(0, lse(mu + z) - mu_s)^2 / (2 eta2)
// by damped Newton. Q is tridiagonal and the Hessian is tridiagonal plus a
// rank-one term, so each step costs O(N).
struct ConstrainedMode {
  std::vector<double> gaps;     // Y*
  std::vector<double> weights;  // p = softmax(Y*)
  double log_survival = 0.0;    // max(mu_s, lse(Y*))
  double lambda = 0.0;          // (log S* - mu_s) / eta2
};

inline double log_sum_exp(std::span<const double> y, std::vector<double>* softmax = nullptr) {
  const double hi = *std::max_element(y.begin(), y.end());
  double sum = 0.0;
  for (double v : y) sum += std::exp(v - hi);
  if (softmax) {
    softmax->resize(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) (*softmax)[j] = std::exp(y[j] - hi) / sum;
  }
  return hi + std::log(sum);
}

// Solves the symmetric tridiagonal system (diag, off) x = b in place of b.
inline void solve_tridiagonal(std::vector<double> diag, const std::vector<double>& off, std::vector<double>& b) {
  const std::size_t n = diag.size();
  for (std::size_t k = 1; k < n; ++k) {
    const double f = off[k - 1] / diag[k - 1];
    diag[k] -= f * off[k - 1];
    b[k] -= f * b[k - 1];
  }
  b[n - 1] /= diag[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) b[k] = (b[k] - off[k] * b[k + 1]) / diag[k];
}

inline ConstrainedMode constrained_mode(double mu, double mu_s, double m2, double sigma2, double eta2,
                                        std::size_t n) {
  ConstrainedMode mode;
  mode.gaps.assign(n, mu);
  mode.log_survival = mu_s;
  if (n == 0 || log_sum_exp(mode.gaps) <= mu_s) return mode;

  std::vector<double> qd(n, (1.0 + m2 * m2) / sigma2), qo(n - 1, -m2 / sigma2);
  qd[n - 1] = 1.0 / sigma2;
  std::vector<double> z(n, 0.0), y(n), p, grad(n), step(n), ps(n), trial(n);

  auto objective = [&](const std::vector<double>& zz, std::vector<double>* soft) {
    for (std::size_t j = 0; j < n; ++j) y[j] = mu + zz[j];
    const double excess = std::max(0.0, log_sum_exp(y, soft) - mu_s);
    double quad = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      quad += qd[j] * zz[j] * zz[j];
      if (j + 1 < n) quad += 2.0 * qo[j] * zz[j] * zz[j + 1];
    }
    return 0.5 * quad + 0.5 * excess * excess / eta2;
  };

  double f = objective(z, &p);
  for (int iter = 0; iter < 200; ++iter) {
    const double k = std::max(0.0, log_sum_exp(y) - mu_s) / eta2;
    for (std::size_t j = 0; j < n; ++j) {
      grad[j] = qd[j] * z[j] + k * p[j];
      if (j > 0) grad[j] += qo[j - 1] * z[j - 1];
      if (j + 1 < n) grad[j] += qo[j] * z[j + 1];
    }
    // Hessian = (Q + k diag(p)) + c p p'.
    std::vector<double> ad(n);
    for (std::size_t j = 0; j < n; ++j) ad[j] = qd[j] + k * p[j];
    const double c = k > 0.0 ? 1.0 / eta2 - k : 0.0;
    step = grad;
    solve_tridiagonal(ad, qo, step);
    ps = p;
    solve_tridiagonal(ad, qo, ps);
    const double px = std::inner_product(p.begin(), p.end(), step.begin(), 0.0);
    const double py = std::inner_product(p.begin(), p.end(), ps.begin(), 0.0);
    for (std::size_t j = 0; j < n; ++j) step[j] -= c * px / (1.0 + c * py) * ps[j];

    const double slope = std::inner_product(grad.begin(), grad.end(), step.begin(), 0.0);
    if (!(slope > 1e-14 * (1.0 + std::abs(f)))) break;
    double t = 1.0;
    double f_new = f;
    std::vector<double> p_new;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = z[j] - t * step[j];
      f_new = objective(trial, &p_new);
      if (f_new <= f - 1e-4 * t * slope) break;
    }
    if (!(f_new < f)) break;
    z = trial;
    p = std::move(p_new);
    f = f_new;
  }

  for (std::size_t j = 0; j < n; ++j) y[j] = mu + z[j];
  mode.lambda = std::max(0.0, log_sum_exp(y, &mode.weights) - mu_s) / eta2;
  // Recentre on the tilt actually used, mu - Q^{-1} lambda p and
  // mu_s + lambda eta2, so that the acceptance ratio is exact even if Newton
  // stopped short of the optimum.
  std::vector<double> shift(n);
  for (std::size_t j = 0; j < n; ++j) shift[j] = mode.lambda * mode.weights[j];
  solve_tridiagonal(qd, qo, shift);
  for (std::size_t j = 0; j < n; ++j) mode.gaps[j] = mu - shift[j];
  mode.log_survival = mu_s + mode.lambda * eta2;
  return mode;
}

}  // namespace detail

// Exact draw of (Y, S) from the constrained joint given N, by rejection.
//
// Plain rejection (gaps and S from their own laws, keep T_N <= S) is hopeless
// when the gaps are long relative to S. The proposal is instead centred at the
// constrained mode (Y*, log S*): gaps ~ N(Y*, Sigma) with the AR(1) covariance
// Sigma, log S ~ N(log S*, eta2). With t = lambda p, p = softmax(Y*), the
// target/proposal ratio is proportional to exp(t'Y - lambda log S), and on the
// feasible set t'Y <= lambda (lse(Y) - H(p)) <= lambda (log S - H(p)) by the
// Gibbs inequality. Accepting with probability
// exp(t'Y - lambda log S + lambda H(p)) is therefore exact. When the
// unconstrained means are feasible, lambda = 0 and this is plain rejection.
//
// Returns false when max_attempts proposals are all rejected; `attempts`
// reports the number of proposals used either way.
inline bool draw_constrained_joint(std::span<const double> x, const Globals& g,
                                   const RandomEffect& re, long count, Rng& rng, long max_attempts,
                                   Trajectory& out, long& attempts) {
  const double mu = dot(x, g.beta) + re.m1;
  const double mu_s = dot(x, g.gamma) + re.delta;
  const double sd = std::sqrt(g.sigma2);
  const double eta = std::sqrt(g.eta2);
  const auto n = static_cast<std::size_t>(count);

  auto mode = detail::constrained_mode(mu, mu_s, re.m2, g.sigma2, g.eta2, n);
  bool finite = std::isfinite(mode.log_survival) && std::isfinite(mode.lambda);
  for (double y : mode.gaps) finite = finite && std::isfinite(y);
  if (!finite) mode = detail::ConstrainedMode{std::vector<double>(n, mu), {}, mu_s, 0.0};
  const double lambda = mode.lambda;
  double entropy = 0.0;
  for (double p : mode.weights)
    if (p > 0.0) entropy -= p * std::log(p);

  out.gaps.resize(n);
  for (attempts = 1; attempts <= max_attempts; ++attempts) {
    double prev_dev = 0.0;
    double total = 0.0;
    double tilt_y = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double dev = re.m2 * prev_dev + sd * rng.normal();
      out.gaps[k] = mode.gaps[k] + dev;
      prev_dev = dev;
      total += std::exp(out.gaps[k]);
      if (lambda > 0.0) tilt_y += mode.weights[k] * out.gaps[k];
    }
    const double log_s = mode.log_survival + eta * rng.normal();
    out.survival = std::exp(log_s);
    if (!(total <= out.survival && std::isfinite(total) && out.survival > 0.0)) continue;
    if (lambda == 0.0) return true;
    if (std::log(rng.uniform()) < lambda * (tilt_y - log_s + entropy)) return true;
  }
  attempts = max_attempts;
  return false;
}

// Generates subjects from the model: round-robin cluster membership, uniform
// covariates, negative-binomial counts and the constrained (Y, S) joint.
inline SimulatedData simulate_dataset(const SimulationConfig& config, Rng& rng) {
  config.validate();
  SimulatedData out;
  out.truth.globals = config.globals();
  out.truth.atoms = config.cluster_atoms;
  out.data.q = config.q;
  out.data.individuals.reserve(config.L);
  const std::size_t clusters = config.cluster_atoms.size();
  for (std::size_t i = 0; i < config.L; ++i) {
    const std::size_t h = i % clusters;
    Individual ind;
    ind.covariates.resize(config.q);
    for (auto& v : ind.covariates) v = rng.uniform();
    const long count = rng.negative_binomial(config.r, config.lambda);

    Trajectory traj;
    long attempts = 0;
    if (!draw_constrained_joint(ind.covariates, out.truth.globals, config.cluster_atoms[h], count,
                                rng, config.max_attempts, traj, attempts)) {
      throw SimulationError("individual " + std::to_string(i) + " (N = " + std::to_string(count) +
                            "): no draw satisfied T_N <= S in " + std::to_string(attempts) +
                            " attempts; acceptance rate below " +
                            std::to_string(1.0 / static_cast<double>(attempts)));
    }
    ind.event_times = from_log_gaps(traj.gaps);
    ind.censor_time = traj.survival;
    ind.survival_observed = true;

    out.data.individuals.push_back(std::move(ind));
    out.truth.assignments.push_back(h);
    out.truth.counts.push_back(count);
    out.truth.trajectories.push_back(std::move(traj));
  }
  return out;
}

// Censors exactly round(rate * L) subjects chosen by simple random sampling.
// A censored subject's censor time is uniform on (T_1, S) when it has events
// and on (0, S) otherwise; events after the censor time are hidden.
inline Dataset apply_censoring(const SimulatedData& sim, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("censor rate must lie in [0, 1)");
  Dataset data = sim.data;
  const std::size_t n = data.size();
  const auto n_censor = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < n_censor; ++k) {
    const std::size_t pick = k + rng.index(n - k);
    std::swap(order[k], order[pick]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_censor));
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t i : chosen) {
    Individual& ind = data.individuals[i];
    const double survival = sim.truth.trajectories[i].survival;
    const double lo = ind.event_times.empty() ? 0.0 : ind.event_times.front();
    if (!(lo < survival)) {
      throw SimulationError("individual " + std::to_string(i) + ": first event coincides with survival");
    }
    double c = rng.uniform(lo, survival);
    while (!(c > lo && c < survival)) c = rng.uniform(lo, survival);
    std::erase_if(ind.event_times, [c](double t) { return t > c; });
    ind.censor_time = c;
    ind.survival_observed = false;
  }
  return data;
}

}  // namespace recsurv

#endif
