// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_SAMPLER_HPP
#define RECSURV_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsurv/data.hpp"
#include "recsurv/model.hpp"
#include "recsurv/rng.hpp"
#include "recsurv/slice.hpp"

namespace recsurv {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Imputed quantities for one subject. For an uncensored subject count equals
// the observed number of events, tail is empty and survival equals the
// censor time.
struct LatentState {
  long count = 0;
  std::vector<double> tail;  // log gaps n_i+1 .. N_i
  double survival = 0.0;

  friend bool operator==(const LatentState&, const LatentState&) = default;
};

struct ModelState {
  Globals globals;
  std::vector<std::size_t> assignments;  // cluster label per subject
  std::vector<RandomEffect> atoms;       // one per occupied cluster
  std::vector<LatentState> latent;

  std::size_t clusters() const { return atoms.size(); }
  const RandomEffect& effect(std::size_t i) const { return atoms[assignments[i]]; }

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct MoveProbabilities {
  double birth = 0.35;
  double death = 0.35;
  double refresh = 0.30;

  friend bool operator==(const MoveProbabilities&, const MoveProbabilities&) = default;
};

struct SamplerConfig {
  long iterations = 200000;
  long burn_in = 20000;
  long thin = 10;
  std::uint64_t seed = 1;
  double slice_width = 1.0;
  int slice_max_steps = 50;
  int aux_components = 3;
  MoveProbabilities moves;

  void validate() const {
    if (iterations <= 0) throw std::invalid_argument("iterations must be positive");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be non-negative");
    if (burn_in >= iterations) {
      throw std::invalid_argument("burn_in (" + std::to_string(burn_in) +
                                  ") must be smaller than iterations (" +
                                  std::to_string(iterations) + ")");
    }
    if (thin < 1) throw std::invalid_argument("thin must be at least 1");
    if (!(slice_width > 0.0)) throw std::invalid_argument("slice_width must be positive");
    if (slice_max_steps < 1) throw std::invalid_argument("slice_max_steps must be positive");
    if (aux_components < 1) throw std::invalid_argument("aux_components must be positive");
    if (moves.birth < 0.0 || moves.death < 0.0 || moves.refresh < 0.0 ||
        std::abs(moves.birth + moves.death + moves.refresh - 1.0) > 1e-9) {
      throw std::invalid_argument("move probabilities must be non-negative and sum to one");
    }
  }

  long stored_samples() const { return (iterations - burn_in) / thin; }

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

// Thinned post-burn-in states plus everything needed to reproduce them.
struct Chain {
  SamplerConfig config;
  Hyperparams hyper;
  std::uint64_t stream = 0;
  std::size_t q = 0;
  std::size_t individuals = 0;
  std::vector<long> iterations;  // sweep index of each stored sample
  std::vector<ModelState> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  friend bool operator==(const Chain&, const Chain&) = default;
};

// Likelihood policy used by the sampler. Replacing it changes how counts and
// (gap, survival) blocks are scored; the latent refresh conditionals keep the
// log-normal structure of the default model.
struct JointModel {
  double count_log_pmf(long n, double r, double lambda) const { return nb_log_pmf(n, r, lambda); }

  double log_joint(std::span<const double> gaps, double survival, std::span<const double> x,
                   const Globals& g, const RandomEffect& re) const {
    return recsurv::log_joint(gaps, survival, x, g, re);
  }
};

struct MoveStats {
  long births_proposed = 0;
  long births_accepted = 0;
  long deaths_proposed = 0;
  long deaths_accepted = 0;
  long refreshes = 0;

  double birth_rate() const {
    return births_proposed ? static_cast<double>(births_accepted) / births_proposed : 0.0;
  }
  double death_rate() const {
    return deaths_proposed ? static_cast<double>(deaths_accepted) / deaths_proposed : 0.0;
  }
};

// Transdimensional Gibbs sampler. One sweep updates, in order: censored
// latents (reversible jump on N_i with refresh of S_i and the latent tail),
// cluster memberships and atoms (Neal's Algorithm 8), the DP concentration,
// then the remaining globals by univariate slice sampling.
template <class Model = JointModel>
class GibbsSampler {
 public:
  GibbsSampler(const Dataset& data, Hyperparams hyper, SamplerConfig config, Model model = {})
      : data_(data), hyper_(hyper), config_(config), model_(std::move(model)) {
    hyper_.validate();
    config_.validate();
    slice_.width = config_.slice_width;
    slice_.max_steps = config_.slice_max_steps;
    observed_gaps_.reserve(data_.size());
    for (const auto& ind : data_.individuals) observed_gaps_.push_back(to_log_gaps(ind.event_times));
    gaps_ = observed_gaps_;
  }

  const Dataset& data() const { return data_; }
  const Hyperparams& hyper() const { return hyper_; }
  const SamplerConfig& config() const { return config_; }
  const Model& model() const { return model_; }
  const MoveStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  ModelState initial_state() const {
    ModelState s;
    const std::size_t q = data_.q;
    s.globals.beta.assign(q, 0.0);
    s.globals.gamma.assign(q, 0.0);
    s.globals.sigma2 = 1.0;
    s.globals.eta2 = 1.0;
    s.globals.r = 1.0;
    double mean_n = 0.0;
    for (const auto& ind : data_.individuals) mean_n += static_cast<double>(ind.observed_events());
    if (!data_.individuals.empty()) mean_n /= static_cast<double>(data_.size());
    s.globals.lambda = mean_n + 1.0;
    s.globals.M = 1.0;
    if (!data_.individuals.empty()) s.atoms.push_back(RandomEffect{});
    s.assignments.assign(data_.size(), 0);
    s.latent.resize(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& ind = data_[i];
      auto& lat = s.latent[i];
      lat.count = static_cast<long>(ind.observed_events());
      const double last = ind.event_times.empty() ? 0.0 : ind.event_times.back();
      lat.survival = ind.survival_observed ? ind.censor_time : std::max(ind.censor_time, last) * 1.5;
    }
    return s;
  }

  // Throws SamplerError describing the first violated state invariant.
  void check_invariants(const ModelState& s) const {
    auto fail = [](const std::string& what) { throw SamplerError("invalid state: " + what); };
    if (s.assignments.size() != data_.size() || s.latent.size() != data_.size()) {
      fail("dimension mismatch with dataset");
    }
    if (s.globals.beta.size() != data_.q || s.globals.gamma.size() != data_.q) {
      fail("coefficient length differs from q");
    }
    for (double v : {s.globals.sigma2, s.globals.eta2, s.globals.r, s.globals.lambda, s.globals.M}) {
      if (!(v > 0.0) || !std::isfinite(v)) fail("non-positive scale parameter");
    }
    std::vector<std::size_t> sizes(s.atoms.size(), 0);
    for (std::size_t i = 0; i < s.assignments.size(); ++i) {
      if (s.assignments[i] >= s.atoms.size()) fail("assignment of " + std::to_string(i) + " has no atom");
      ++sizes[s.assignments[i]];
    }
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] == 0) fail("atom " + std::to_string(k) + " has no members");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& ind = data_[i];
      const auto& lat = s.latent[i];
      const auto n = static_cast<long>(ind.observed_events());
      const std::string who = "individual " + std::to_string(i);
      if (lat.count != n + static_cast<long>(lat.tail.size())) fail(who + ": count/tail mismatch");
      if (ind.survival_observed) {
        if (!lat.tail.empty() || lat.survival != ind.censor_time) fail(who + ": observed latents altered");
        continue;
      }
      if (!(lat.survival > ind.censor_time)) fail(who + ": survival not beyond censor time");
      double t = ind.event_times.empty() ? 0.0 : ind.event_times.back();
      for (std::size_t j = 0; j < lat.tail.size(); ++j) {
        t += std::exp(lat.tail[j]);
        if (j == 0 && !(t > ind.censor_time)) fail(who + ": first latent event before censor time");
      }
      if (t > lat.survival) fail(who + ": last event after survival");
    }
  }

  void update_censored_latents(ModelState& s, Rng& rng) {
    bind(s);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (data_[i].survival_observed) continue;
      const double u = rng.uniform();
      if (u < config_.moves.birth) {
        birth(s, i, rng);
      } else if (u < config_.moves.birth + config_.moves.death) {
        death(s, i, rng);
      } else {
        refresh(s, i, rng);
      }
    }
  }

  void update_random_effects(ModelState& s, Rng& rng) {
    bind(s);
    const std::size_t n_ind = data_.size();
    if (n_ind == 0) return;
    const auto m = static_cast<std::size_t>(config_.aux_components);
    const double log_aux_weight = std::log(s.globals.M / static_cast<double>(m));

    std::vector<std::size_t> sizes(s.atoms.size(), 0);
    for (auto c : s.assignments) ++sizes[c];

    std::vector<RandomEffect> aux(m);
    std::vector<double> logw;
    for (std::size_t i = 0; i < n_ind; ++i) {
      const std::size_t c = s.assignments[i];
      --sizes[c];
      std::size_t first_fresh = 0;
      if (sizes[c] == 0) {
        // The vacated atom becomes the first auxiliary component.
        aux[0] = s.atoms[c];
        first_fresh = 1;
        remove_cluster(s, sizes, c);
      }
      for (std::size_t a = first_fresh; a < m; ++a) aux[a] = draw_base(rng);

      const std::size_t k_live = s.atoms.size();
      logw.resize(k_live + m);
      for (std::size_t k = 0; k < k_live; ++k) {
        logw[k] = std::log(static_cast<double>(sizes[k])) + individual_log_joint(s, i, s.atoms[k]);
      }
      for (std::size_t a = 0; a < m; ++a) {
        logw[k_live + a] = log_aux_weight + individual_log_joint(s, i, aux[a]);
      }
      const std::size_t pick = rng.categorical_log(logw);
      if (pick < k_live) {
        s.assignments[i] = pick;
        ++sizes[pick];
      } else {
        s.atoms.push_back(aux[pick - k_live]);
        sizes.push_back(1);
        s.assignments[i] = s.atoms.size() - 1;
      }
    }

    // Refresh each atom given its members.
    std::vector<std::vector<std::size_t>> members(s.atoms.size());
    for (std::size_t i = 0; i < n_ind; ++i) members[s.assignments[i]].push_back(i);
    for (std::size_t k = 0; k < s.atoms.size(); ++k) {
      RandomEffect atom = s.atoms[k];
      auto cluster_target = [&](const RandomEffect& re) {
        double lp = 0.0;
        for (auto i : members[k]) lp += individual_log_joint(s, i, re);
        return lp;
      };
      atom.m1 = slice_param("atom m1", atom.m1, rng, [&](double v) {
        RandomEffect re = atom;
        re.m1 = v;
        return cluster_target(re) + normal_logpdf(v, 0.0, hyper_.sigma2_m);
      });
      atom.m2 = slice_param("atom m2", atom.m2, rng, [&](double v) {
        RandomEffect re = atom;
        re.m2 = v;
        return cluster_target(re) + normal_logpdf(v, 0.0, hyper_.sigma2_m);
      });
      atom.delta = slice_param("atom delta", atom.delta, rng, [&](double v) {
        RandomEffect re = atom;
        re.delta = v;
        return cluster_target(re) + normal_logpdf(v, 0.0, hyper_.sigma2_delta);
      });
      s.atoms[k] = atom;
    }
  }

  // Auxiliary-variable update for M given K occupied clusters among L
  // subjects (Escobar and West, 1995). With no subjects M is drawn from its
  // prior.
  void update_concentration(ModelState& s, Rng& rng) const {
    const double a = hyper_.a_M;
    const double b = hyper_.b_M;
    const auto n = static_cast<double>(data_.size());
    if (data_.size() == 0) {
      s.globals.M = rng.gamma(a, b);
      return;
    }
    const auto k = static_cast<double>(s.atoms.size());
    const double eta = rng.beta(s.globals.M + 1.0, n);
    const double rate = b - std::log(eta);
    const double odds = (a + k - 1.0) / (n * rate);
    const double shape = rng.uniform() < odds / (1.0 + odds) ? a + k : a + k - 1.0;
    s.globals.M = rng.gamma(shape, rate);
  }

  void update_globals(ModelState& s, Rng& rng) {
    bind(s);
    Globals& g = s.globals;
    for (std::size_t k = 0; k < g.beta.size(); ++k) {
      g.beta[k] = slice_param("beta[" + std::to_string(k + 1) + "]", g.beta[k], rng, [&](double v) {
        Globals trial = g;
        trial.beta[k] = v;
        return data_log_joint(s, trial) + normal_logpdf(v, 0.0, hyper_.sigma2_beta);
      });
    }
    for (std::size_t k = 0; k < g.gamma.size(); ++k) {
      g.gamma[k] = slice_param("gamma[" + std::to_string(k + 1) + "]", g.gamma[k], rng, [&](double v) {
        Globals trial = g;
        trial.gamma[k] = v;
        return data_log_joint(s, trial) + normal_logpdf(v, 0.0, hyper_.sigma2_gamma);
      });
    }
    // Scale parameters are sampled on the log scale; "+ t" is the Jacobian.
    g.sigma2 = std::exp(slice_param("sigma2", std::log(g.sigma2), rng, [&](double t) {
      Globals trial = g;
      trial.sigma2 = std::exp(t);
      return data_log_joint(s, trial) +
             inv_gamma_logpdf(trial.sigma2, 0.5 * hyper_.nu_sigma2,
                              0.5 * hyper_.nu_sigma2 * hyper_.sigma2_0) +
             t;
    }));
    g.eta2 = std::exp(slice_param("eta2", std::log(g.eta2), rng, [&](double t) {
      Globals trial = g;
      trial.eta2 = std::exp(t);
      return data_log_joint(s, trial) +
             inv_gamma_logpdf(trial.eta2, 0.5 * hyper_.nu_eta2, 0.5 * hyper_.nu_eta2 * hyper_.eta2_0) +
             t;
    }));
    g.r = std::exp(slice_param("r", std::log(g.r), rng, [&](double t) {
      const double r = std::exp(t);
      return count_log_lik(s, r, g.lambda) + gamma_logpdf(r, hyper_.a_r, hyper_.b_r) + t;
    }));
    g.lambda = std::exp(slice_param("lambda", std::log(g.lambda), rng, [&](double t) {
      const double lambda = std::exp(t);
      return count_log_lik(s, g.r, lambda) + gamma_logpdf(lambda, hyper_.a_lambda, hyper_.b_lambda) + t;
    }));
  }

  void sweep(ModelState& s, Rng& rng) {
    update_censored_latents(s, rng);
    update_random_effects(s, rng);
    update_concentration(s, rng);
    update_globals(s, rng);
  }

  // Full log gap vector (observed followed by latent) of subject i, as of the
  // most recent update call.
  std::span<const double> gaps(std::size_t i) const { return gaps_[i]; }

  double individual_log_joint(const ModelState& s, std::size_t i, const RandomEffect& re) const {
    return model_.log_joint(gaps_[i], s.latent[i].survival, data_[i].covariates, s.globals, re);
  }

 private:
  // Synchronises the full gap vectors with the latent tails in `s`.
  void bind(const ModelState& s) {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& obs = observed_gaps_[i];
      const auto& tail = s.latent[i].tail;
      auto& full = gaps_[i];
      full.resize(obs.size() + tail.size());
      std::copy(tail.begin(), tail.end(), full.begin() + static_cast<std::ptrdiff_t>(obs.size()));
    }
  }

  double data_log_joint(const ModelState& s, const Globals& g) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      lp += model_.log_joint(gaps_[i], s.latent[i].survival, data_[i].covariates, g,
                             s.atoms[s.assignments[i]]);
    }
    return lp;
  }

  double count_log_lik(const ModelState& s, double r, double lambda) const {
    double lp = 0.0;
    for (const auto& lat : s.latent) lp += model_.count_log_pmf(lat.count, r, lambda);
    return lp;
  }

  template <class F>
  double slice_param(const std::string& name, double x0, Rng& rng, F&& target) const {
    try {
      return slice_sample(target, x0, slice_, rng);
    } catch (const SliceError& e) {
      throw SamplerError("slice update of " + name + " failed: " + e.what());
    }
  }

  RandomEffect draw_base(Rng& rng) const {
    const double sm = std::sqrt(hyper_.sigma2_m);
    RandomEffect re;
    re.m1 = rng.normal(0.0, sm);
    re.m2 = rng.normal(0.0, sm);
    re.delta = rng.normal(0.0, std::sqrt(hyper_.sigma2_delta));
    return re;
  }

  // Drops empty cluster c by moving the last cluster into its slot.
  static void remove_cluster(ModelState& s, std::vector<std::size_t>& sizes, std::size_t c) {
    const std::size_t last = s.atoms.size() - 1;
    if (c != last) {
      s.atoms[c] = s.atoms[last];
      sizes[c] = sizes[last];
      for (auto& a : s.assignments)
        if (a == last) a = c;
    }
    s.atoms.pop_back();
    sizes.pop_back();
  }

  // Mean of the AR(1) one-step predictive for the gap following `prev_gaps`;
  // its variance is sigma2.
  static double next_gap_mean(std::span<const double> prev_gaps, double mu, const RandomEffect& re) {
    const double prev_dev = prev_gaps.empty() ? 0.0 : prev_gaps.back() - mu;
    return mu + re.m2 * prev_dev;
  }

  void birth(ModelState& s, std::size_t i, Rng& rng) {
    ++stats_.births_proposed;
    const auto& ind = data_[i];
    auto& lat = s.latent[i];
    auto& full = gaps_[i];
    const RandomEffect& re = s.effect(i);
    const Globals& g = s.globals;
    const double mu = dot(ind.covariates, g.beta) + re.m1;
    const double mean = next_gap_mean(full, mu, re);
    const double sd = std::sqrt(g.sigma2);
    const double y = rng.normal(mean, sd);

    const double t_old = total_time(full);
    const double t_new = t_old + std::exp(y);
    if (t_new > lat.survival) return;
    if (lat.tail.empty() && !(t_new > ind.censor_time)) return;

    const double old_lj = model_.log_joint(full, lat.survival, ind.covariates, g, re);
    full.push_back(y);
    const double new_lj = model_.log_joint(full, lat.survival, ind.covariates, g, re);
    const double log_ratio = model_.count_log_pmf(lat.count + 1, g.r, g.lambda) -
                             model_.count_log_pmf(lat.count, g.r, g.lambda) + new_lj - old_lj -
                             normal_logpdf(y, mean, g.sigma2) +
                             std::log(config_.moves.death / config_.moves.birth);
    if (std::log(rng.uniform()) < log_ratio) {
      ++stats_.births_accepted;
      ++lat.count;
      lat.tail.push_back(y);
    } else {
      full.pop_back();
    }
  }

  void death(ModelState& s, std::size_t i, Rng& rng) {
    ++stats_.deaths_proposed;
    auto& lat = s.latent[i];
    if (lat.tail.empty()) return;
    const auto& ind = data_[i];
    auto& full = gaps_[i];
    const RandomEffect& re = s.effect(i);
    const Globals& g = s.globals;
    const double mu = dot(ind.covariates, g.beta) + re.m1;

    const double old_lj = model_.log_joint(full, lat.survival, ind.covariates, g, re);
    const double y = full.back();
    full.pop_back();
    const double mean = next_gap_mean(full, mu, re);
    const double new_lj = model_.log_joint(full, lat.survival, ind.covariates, g, re);
    const double log_ratio = model_.count_log_pmf(lat.count - 1, g.r, g.lambda) -
                             model_.count_log_pmf(lat.count, g.r, g.lambda) + new_lj - old_lj +
                             normal_logpdf(y, mean, g.sigma2) +
                             std::log(config_.moves.birth / config_.moves.death);
    if (std::log(rng.uniform()) < log_ratio) {
      ++stats_.deaths_accepted;
      --lat.count;
      lat.tail.pop_back();
    } else {
      full.push_back(y);
    }
  }

  void refresh(ModelState& s, std::size_t i, Rng& rng) {
    ++stats_.refreshes;
    const auto& ind = data_[i];
    auto& lat = s.latent[i];
    auto& full = gaps_[i];
    const RandomEffect& re = s.effect(i);
    const Globals& g = s.globals;

    // S from the log-normal survival law truncated to (max(c, T_N), inf).
    const double lower = std::max(ind.censor_time, total_time(full));
    const double mu_s = dot(ind.covariates, g.gamma) + re.delta;
    const double eta = std::sqrt(g.eta2);
    lat.survival = std::exp(mu_s + eta * truncated_normal_tail((std::log(lower) - mu_s) / eta, rng));
    if (!(lat.survival > lower)) lat.survival = std::nextafter(lower, INFINITY);

    // Latent tail gaps, one at a time.
    const std::size_t n_obs = ind.observed_events();
    for (std::size_t j = n_obs; j < full.size(); ++j) {
      auto target = [&](double y) {
        const double saved = full[j];
        full[j] = y;
        double lp = -INFINITY;
        const double t_total = total_time(full);
        bool ok = t_total <= lat.survival;
        if (ok && j == n_obs) {
          const double t_first = total_time(std::span<const double>(full).first(n_obs + 1));
          ok = t_first > ind.censor_time;
        }
        if (ok) lp = loggap_logdensity(full, ind.covariates, g.beta, re, g.sigma2);
        full[j] = saved;
        return lp;
      };
      full[j] = slice_param("latent gap", full[j], rng, target);
      lat.tail[j - n_obs] = full[j];
    }
  }

  // Standard normal draw conditioned on Z > a, by inversion on the upper tail.
  static double truncated_normal_tail(double a, Rng& rng) {
    const double u = rng.uniform();
    if (a < 30.0) {
      const double tail = normal_sf(a);
      if (tail > 0.0) {
        if (a < 0.0) {
          // Lower bound in the bulk: invert through the CDF.
          const double lo = normal_cdf(a);
          return normal_quantile(lo + u * (1.0 - lo));
        }
        return normal_upper_quantile(tail * u);
      }
    }
    // Far tail: Z^2 / 2 - a^2 / 2 is approximately Exp(1).
    return std::sqrt(a * a - 2.0 * std::log(u));
  }

  const Dataset& data_;
  Hyperparams hyper_;
  SamplerConfig config_;
  Model model_;
  SliceOptions slice_;
  std::vector<LogGaps> observed_gaps_;
  std::vector<LogGaps> gaps_;
  MoveStats stats_;
};

struct Progress {
  long iteration = 0;
  std::size_t clusters = 0;
  MoveStats moves;
};

struct ChainCallbacks {
  std::function<void(const Progress&)> progress;
  long progress_every = 1000;
  // When set, stored states are handed here instead of kept in the Chain.
  std::function<void(long iteration, const ModelState&)> sample;
};

// Runs config.iterations sweeps from the default initial state and keeps every
// thin-th state after burn-in. `stream` selects an independent random stream
// for parallel chains sharing one seed.
template <class Model = JointModel>
Chain run_chain(const Dataset& data, const Hyperparams& hyper, const SamplerConfig& config,
                std::uint64_t stream = 0, Model model = {}, const ChainCallbacks& callbacks = {}) {
  config.validate();
  GibbsSampler<Model> sampler(data, hyper, config, std::move(model));
  Rng rng(config.seed, stream);
  Chain chain;
  chain.config = config;
  chain.hyper = hyper;
  chain.stream = stream;
  chain.q = data.q;
  chain.individuals = data.size();
  if (!callbacks.sample) chain.samples.reserve(static_cast<std::size_t>(config.stored_samples()));

  ModelState state = sampler.initial_state();
  for (long it = 1; it <= config.iterations; ++it) {
    try {
      sampler.sweep(state, rng);
    } catch (const std::exception& e) {
      throw SamplerError("iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      sampler.check_invariants(state);
      if (callbacks.sample) {
        callbacks.sample(it, state);
      } else {
        chain.iterations.push_back(it);
        chain.samples.push_back(state);
      }
    }
    if (callbacks.progress &&
        (it % std::max(1L, callbacks.progress_every) == 0 || it == config.iterations)) {
      callbacks.progress(Progress{it, state.clusters(), sampler.stats()});
    }
  }
  return chain;
}

}  // namespace recsurv

#endif
