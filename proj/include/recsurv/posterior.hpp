// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_POSTERIOR_HPP
#define RECSURV_POSTERIOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "recsurv/model.hpp"
#include "recsurv/rng.hpp"
#include "recsurv/sampler.hpp"
#include "recsurv/simulate.hpp"

namespace recsurv {

struct ScalarSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `sorted` must be ascending and nonempty.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Mean and equal-tailed interval at `level`.
inline ScalarSummary summarize_values(std::vector<double> values, double level = 0.95) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("summarize: level must be in (0, 1)");
  ScalarSummary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const double alpha = 0.5 * (1.0 - level);
  s.lower = sorted_quantile(values, alpha);
  s.upper = sorted_quantile(values, 1.0 - alpha);
  // Keep a constant chain exactly degenerate.
  s.mean = std::clamp(s.mean, values.front(), values.back());
  return s;
}

template <class Extractor>
ScalarSummary summarize_scalar(const Chain& chain, Extractor&& extract, double level = 0.95) {
  if (chain.empty()) throw std::invalid_argument("summarize_scalar: empty chain");
  std::vector<double> values;
  values.reserve(chain.size());
  for (const auto& s : chain.samples) values.push_back(static_cast<double>(extract(s)));
  return summarize_values(std::move(values), level);
}

// Dense row-major square matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Relabels clusters in order of first appearance.
struct Partition {
  std::vector<std::size_t> labels;

  static Partition canonical(std::span<const std::size_t> raw) {
    Partition p;
    p.labels.resize(raw.size());
    std::map<std::size_t, std::size_t> relabel;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto [it, inserted] = relabel.try_emplace(raw[i], relabel.size());
      p.labels[i] = it->second;
    }
    return p;
  }

  std::size_t clusters() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  friend bool operator==(const Partition&, const Partition&) = default;
  friend auto operator<=>(const Partition&, const Partition&) = default;
};

namespace detail {

// Upper-triangle counts of samples in which i and j share a cluster.
inline std::vector<long> cocluster_counts(const Chain& chain) {
  const std::size_t n = chain.samples.front().assignments.size();
  std::vector<long> counts(n * n, 0);
  for (const auto& s : chain.samples) {
    const auto& a = s.assignments;
    for (std::size_t i = 0; i < n; ++i) {
      long* row = &counts[i * n];
      for (std::size_t j = i + 1; j < n; ++j) row[j] += (a[i] == a[j]);
    }
  }
  return counts;
}

}  // namespace detail

// Fraction of samples in which i and j share a cluster.
inline SquareMatrix coclustering_matrix(const Chain& chain) {
  if (chain.empty()) throw std::invalid_argument("coclustering_matrix: empty chain");
  const std::size_t n = chain.samples.front().assignments.size();
  const std::vector<long> counts = detail::cocluster_counts(chain);
  SquareMatrix p(n);
  const auto total = static_cast<double>(chain.size());
  for (std::size_t i = 0; i < n; ++i) {
    p(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      p(i, j) = p(j, i) = static_cast<double>(counts[i * n + j]) / total;
    }
  }
  return p;
}

// Binder loss with equal misclassification costs, up to terms constant in
// the partition: sum over pairs i < j of |1(same cluster) - p_ij|.
inline double binder_loss(std::span<const std::size_t> labels, const SquareMatrix& cocluster) {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double same = labels[i] == labels[j] ? 1.0 : 0.0;
      loss += std::abs(same - cocluster(i, j));
    }
  }
  return loss;
}

struct BinderEstimate {
  Partition partition;
  std::size_t sample = 0;  // index of the first sample carrying the partition
  double loss = 0.0;
};

// Minimizes the Binder loss over the partitions visited by the chain; ties go
// to the earliest sample. The search runs on integer co-clustering counts so
// that equal losses compare equal.
inline BinderEstimate binder_partition(const Chain& chain) {
  if (chain.empty()) throw std::invalid_argument("binder_partition: empty chain");
  const std::size_t n = chain.samples.front().assignments.size();
  const auto total = static_cast<long>(chain.size());
  const std::vector<long> counts = detail::cocluster_counts(chain);
  std::map<Partition, std::size_t> seen;
  BinderEstimate best;
  long best_scaled = -1;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    Partition part = Partition::canonical(chain.samples[k].assignments);
    if (!seen.try_emplace(part, k).second) continue;
    long scaled = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const long same = part.labels[i] == part.labels[j] ? total : 0;
        scaled += std::abs(same - counts[i * n + j]);
      }
    }
    if (best_scaled < 0 || scaled < best_scaled) {
      best_scaled = scaled;
      best.sample = k;
      best.partition = std::move(part);
    }
  }
  best.loss = static_cast<double>(best_scaled) / static_cast<double>(total);
  return best;
}

// DP predictive rule given one posterior state: a fresh atom from G_0 with
// probability M / (M + L), otherwise an existing atom chosen with probability
// proportional to its cluster size.
inline RandomEffect draw_predictive_effect(const ModelState& s, const Hyperparams& hyper, Rng& rng) {
  const auto n = static_cast<double>(s.assignments.size());
  const double M = s.globals.M;
  if (s.assignments.empty() || rng.uniform() < M / (M + n)) {
    const double sm = std::sqrt(hyper.sigma2_m);
    RandomEffect re;
    re.m1 = rng.normal(0.0, sm);
    re.m2 = rng.normal(0.0, sm);
    re.delta = rng.normal(0.0, std::sqrt(hyper.sigma2_delta));
    return re;
  }
  // A uniformly chosen subject's atom is size-weighted.
  return s.effect(rng.index(s.assignments.size()));
}

inline std::vector<RandomEffect> predictive_random_effect_draws(const Chain& chain, std::size_t n_draws,
                                                                Rng& rng) {
  if (chain.empty()) throw std::invalid_argument("predictive draws: empty chain");
  std::vector<RandomEffect> draws;
  draws.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) {
    draws.push_back(draw_predictive_effect(chain.samples[rng.index(chain.size())], chain.hyper, rng));
  }
  return draws;
}

struct PredictiveOutcome {
  long count = 0;
  double survival = 0.0;
  LogGaps gaps;
  bool complete = true;  // false: (Y, S) hit the rejection cap, only N is set
};

// Posterior predictive (N, S, Y) for a new subject with covariates x_new.
// N ~ NB(r, lambda) does not depend on (Y, S). When the constrained (Y, S)
// draw exhausts max_attempts this throws, unless allow_incomplete is set, in
// which case the draw keeps its N, survival is NaN and complete is false.
inline std::vector<PredictiveOutcome> predictive_outcome_draws(const Chain& chain,
                                                               std::span<const double> x_new,
                                                               std::size_t n_draws, Rng& rng,
                                                               long max_attempts = 1000000,
                                                               bool allow_incomplete = false) {
  if (chain.empty()) throw std::invalid_argument("predictive draws: empty chain");
  if (x_new.size() != chain.q) {
    throw std::invalid_argument("predictive draws: expected " + std::to_string(chain.q) +
                                " covariates, got " + std::to_string(x_new.size()));
  }
  std::vector<PredictiveOutcome> out;
  out.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) {
    const ModelState& s = chain.samples[rng.index(chain.size())];
    const RandomEffect re = draw_predictive_effect(s, chain.hyper, rng);
    const Globals& g = s.globals;
    PredictiveOutcome draw;
    draw.count = rng.negative_binomial(g.r, g.lambda);
    Trajectory traj;
    long attempts = 0;
    if (draw_constrained_joint(x_new, g, re, draw.count, rng, max_attempts, traj, attempts)) {
      draw.survival = traj.survival;
      draw.gaps = std::move(traj.gaps);
    } else if (allow_incomplete) {
      draw.survival = std::numeric_limits<double>::quiet_NaN();
      draw.complete = false;
    } else {
      throw SimulationError("predictive draw " + std::to_string(d) + " (N = " +
                            std::to_string(draw.count) + "): no draw satisfied T_N <= S in " +
                            std::to_string(attempts) + " attempts");
    }
    out.push_back(std::move(draw));
  }
  return out;
}

struct KaplanMeierPoint {
  double time = 0.0;
  double survival = 1.0;
  std::size_t at_risk = 0;
  std::size_t events = 0;
};

// Product-limit estimate, one point per distinct observed time. Subjects
// censored at an event time count as at risk at that time.
inline std::vector<KaplanMeierPoint> kaplan_meier(std::span<const double> times,
                                                  const std::vector<bool>& events) {
  if (times.empty()) throw std::invalid_argument("kaplan_meier: no observations");
  if (times.size() != events.size()) throw std::invalid_argument("kaplan_meier: length mismatch");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double t : times) {
    if (!(t > 0.0)) throw std::invalid_argument("kaplan_meier: times must be positive");
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });

  std::vector<KaplanMeierPoint> curve;
  double surv = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    std::size_t d = 0;
    std::size_t leaving = 0;
    while (k < order.size() && times[order[k]] == t) {
      d += events[order[k]] ? 1 : 0;
      ++leaving;
      ++k;
    }
    if (d > 0) surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
    curve.push_back({t, surv, at_risk, d});
    at_risk -= leaving;
  }
  return curve;
}

// Posterior mean of log S_i per subject.
inline std::vector<double> posterior_mean_log_survival(const Chain& chain) {
  if (chain.empty()) throw std::invalid_argument("posterior mean: empty chain");
  std::vector<double> mean(chain.individuals, 0.0);
  for (const auto& s : chain.samples)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += std::log(s.latent[i].survival);
  for (auto& m : mean) m /= static_cast<double>(chain.size());
  return mean;
}

struct ClusterCurve {
  std::size_t cluster = 0;
  std::size_t size = 0;
  std::vector<KaplanMeierPoint> curve;
};

// Kaplan-Meier curves per cluster of `partition`, using exp of the posterior
// mean of log S_i for every subject (imputed survival counts as an event).
// Clusters are ordered by decreasing size.
inline std::vector<ClusterCurve> cluster_kaplan_meier(const Chain& chain, const Partition& partition) {
  const std::vector<double> mean_log_s = posterior_mean_log_survival(chain);
  const std::size_t k = partition.clusters();
  std::vector<std::vector<double>> times(k);
  for (std::size_t i = 0; i < partition.labels.size(); ++i) {
    times[partition.labels[i]].push_back(std::exp(mean_log_s[i]));
  }
  std::vector<ClusterCurve> curves;
  for (std::size_t c = 0; c < k; ++c) {
    const std::vector<bool> events(times[c].size(), true);
    curves.push_back({c, times[c].size(), kaplan_meier(times[c], events)});
  }
  std::stable_sort(curves.begin(), curves.end(), [](const auto& a, const auto& b) { return a.size > b.size; });
  return curves;
}

// Posterior frequency of the number of occupied clusters.
inline std::map<std::size_t, std::size_t> cluster_count_distribution(const Chain& chain) {
  std::map<std::size_t, std::size_t> freq;
  for (const auto& s : chain.samples) ++freq[s.clusters()];
  return freq;
}

inline std::size_t cluster_count_mode(const Chain& chain) {
  const auto freq = cluster_count_distribution(chain);
  std::size_t mode = 0;
  std::size_t best = 0;
  for (const auto& [k, n] : freq) {
    if (n > best) {
      best = n;
      mode = k;
    }
  }
  return mode;
}

}  // namespace recsurv

#endif
