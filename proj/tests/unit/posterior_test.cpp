// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "recsurv/posterior.hpp"
#include "support/oracles.hpp"

using namespace recsurv;

namespace {

ModelState labelled(std::vector<std::size_t> labels) {
  ModelState s;
  std::size_t k = 0;
  for (auto l : labels) k = std::max(k, l + 1);
  s.assignments = std::move(labels);
  s.atoms.assign(k, RandomEffect{});
  s.latent.resize(s.assignments.size());
  for (auto& lat : s.latent) lat.survival = 1.0;
  return s;
}

Chain chain_of(const std::vector<std::vector<std::size_t>>& partitions) {
  Chain c;
  c.individuals = partitions.front().size();
  for (const auto& p : partitions) c.samples.push_back(labelled(p));
  return c;
}

// Random label vectors drawn around a few base partitions so that repeats and
// near-ties occur.
std::vector<std::vector<std::size_t>> random_partitions(std::mt19937_64& eng, std::size_t n,
                                                        std::size_t count) {
  std::uniform_int_distribution<std::size_t> label(0, 3);
  std::vector<std::vector<std::size_t>> bases(3, std::vector<std::size_t>(n));
  for (auto& b : bases)
    for (auto& v : b) v = label(eng);
  std::vector<std::vector<std::size_t>> out;
  std::uniform_int_distribution<std::size_t> pick(0, 2), who(0, n - 1);
  for (std::size_t k = 0; k < count; ++k) {
    auto p = bases[pick(eng)];
    if (eng() % 2) p[who(eng)] = label(eng);
    // Scramble the label names; only co-membership is meaningful.
    std::vector<std::size_t> perm{7, 2, 9, 4};
    std::shuffle(perm.begin(), perm.end(), eng);
    for (auto& v : p) v = perm[v];
    out.push_back(p);
  }
  return out;
}

// Geometric-style NB pmf written out with lgamma.
double nb_pmf(long n, double r, double lambda) {
  return std::exp(std::lgamma(n + r) - std::lgamma(r) - std::lgamma(n + 1.0) + r * std::log(r / (r + lambda)) +
                  n * std::log(lambda / (r + lambda)));
}

Chain predictive_chain() {
  Chain c;
  c.q = 2;
  c.individuals = 30;
  // Fresh atoms come from G_0 centred at zero. With the default variance of
  // 100 a fresh m2 is often far outside (-1, 1), the gap process explodes and
  // T_N <= S is out of reach for rejection; gamma = (4, 4) and small base
  // variances keep every fresh atom workable.
  c.hyper.sigma2_m = 0.1;
  c.hyper.sigma2_delta = 1.0;
  for (int k = 0; k < 4; ++k) {
    ModelState s;
    s.globals.beta = {-1.0, 1.0};
    s.globals.gamma = {4.0, 4.0};
    s.globals.sigma2 = 1.0;
    s.globals.eta2 = 1.0;
    s.globals.r = 0.8 + 0.2 * k;
    s.globals.lambda = 5.0 + k;
    s.globals.M = 0.5 + k;
    s.atoms = {{1.0, -0.8, 5.0}, {2.0, 0.0, 6.0}, {3.0, 0.8, 7.0}};
    for (std::size_t i = 0; i < 30; ++i) s.assignments.push_back(i % 3);
    s.latent.resize(30);
    c.samples.push_back(s);
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------- scalar summaries

TEST(Summaries, ConstantChainIsDegenerate) {
  Chain c = chain_of({{0, 0}, {0, 0}, {0, 0}});
  for (auto& s : c.samples) s.globals.lambda = 3.7;
  const auto r = summarize_scalar(c, [](const ModelState& s) { return s.globals.lambda; });
  EXPECT_EQ(r.mean, 3.7);
  EXPECT_EQ(r.lower, 3.7);
  EXPECT_EQ(r.upper, 3.7);
}

TEST(Summaries, ObservedCountIsFixed) {
  Chain c = chain_of({{0}, {0}, {0}, {0}});
  for (auto& s : c.samples) s.latent[0].count = 4;
  const auto r = summarize_scalar(c, [](const ModelState& s) { return s.latent[0].count; });
  EXPECT_EQ(r.lower, 4.0);
  EXPECT_EQ(r.upper, 4.0);
}

TEST(Summaries, GaussianQuantiles) {
  std::mt19937_64 eng(10);
  std::normal_distribution<double> z;
  std::vector<double> v(10000);
  for (auto& x : v) x = z(eng);
  const auto r = summarize_values(v);
  EXPECT_NEAR(r.lower, -1.959964, 0.05);
  EXPECT_NEAR(r.upper, 1.959964, 0.05);
  EXPECT_NEAR(r.mean, 0.0, 0.05);
}

TEST(Summaries, IntervalContainsMedian) {
  std::mt19937_64 eng(12);
  std::exponential_distribution<double> e(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + rep);
    for (auto& x : v) x = e(eng);
    for (double level : {0.5, 0.9, 0.95}) {
      const auto r = summarize_values(v, level);
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
      EXPECT_LE(r.lower, median);
      EXPECT_GE(r.upper, median);
    }
  }
  EXPECT_THROW(summarize_values({}), std::invalid_argument);
  EXPECT_THROW(summarize_values({1.0}, 1.0), std::invalid_argument);
}

// ---------------------------------------------------------------- clustering

TEST(Coclustering, SingleSampleIsIndicator) {
  const auto p = coclustering_matrix(chain_of({{3, 1, 3, 0}}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p(i, j), (i == j || (i + j == 2 && i != j)) ? 1.0 : 0.0);
}

TEST(Coclustering, TwoPartitionsEnumeration) {
  const auto p = coclustering_matrix(chain_of({{0, 0, 1}, {0, 1, 1}}));
  EXPECT_EQ(p(0, 1), 0.5);
  EXPECT_EQ(p(1, 2), 0.5);
  EXPECT_EQ(p(0, 2), 0.0);
}

TEST(Coclustering, SymmetricUnitDiagonal) {
  std::mt19937_64 eng(3);
  const auto c = chain_of(random_partitions(eng, 9, 40));
  const auto p = coclustering_matrix(c);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(p(i, i), 1.0);
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_EQ(p(i, j), p(j, i));
      EXPECT_GE(p(i, j), 0.0);
      EXPECT_LE(p(i, j), 1.0);
    }
  }
}

TEST(Binder, SharedPartitionWins) {
  const auto est = binder_partition(chain_of({{2, 2, 0}, {1, 1, 0}, {0, 0, 5}}));
  EXPECT_EQ(est.partition.labels, (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(est.sample, 0u);
  EXPECT_EQ(est.loss, 0.0);
}

TEST(Binder, MatchesExhaustiveScan) {
  std::mt19937_64 eng(2025);
  for (int rep = 0; rep < 50; ++rep) {
    const auto parts = random_partitions(eng, 8, 20);
    const Chain c = chain_of(parts);
    const auto est = binder_partition(c);
    const auto [index, loss] = oracle::binder_bruteforce(parts);
    EXPECT_EQ(est.sample, index) << "chain " << rep;
    EXPECT_TRUE(oracle::same_partition(est.partition.labels, parts[index]));
    EXPECT_NEAR(est.loss, loss, 1e-12);
    // No sampled partition beats it.
    const auto p = coclustering_matrix(c);
    for (const auto& part : parts) EXPECT_LE(binder_loss(est.partition.labels, p), binder_loss(part, p) + 1e-12);
  }
}

TEST(Binder, InvariantUnderRelabeling) {
  std::mt19937_64 eng(5);
  auto parts = random_partitions(eng, 8, 20);
  const auto before = binder_partition(chain_of(parts));
  for (auto& p : parts)
    for (auto& v : p) v = 100 - v;
  const auto after = binder_partition(chain_of(parts));
  EXPECT_EQ(before.partition, after.partition);
  EXPECT_EQ(before.sample, after.sample);
}

TEST(Partition, CanonicalFirstOccurrence) {
  const std::vector<std::size_t> raw{5, 5, 2, 9, 2};
  const auto p = Partition::canonical(raw);
  EXPECT_EQ(p.labels, (std::vector<std::size_t>{0, 0, 1, 2, 1}));
  EXPECT_EQ(p.clusters(), 3u);
}

TEST(ClusterCount, DistributionAndMode) {
  const Chain c = chain_of({{0, 0, 0}, {0, 1, 1}, {0, 1, 2}, {1, 0, 0}});
  const auto freq = cluster_count_distribution(c);
  EXPECT_EQ(freq.at(1), 1u);
  EXPECT_EQ(freq.at(2), 2u);
  EXPECT_EQ(freq.at(3), 1u);
  EXPECT_EQ(cluster_count_mode(c), 2u);
}

// ---------------------------------------------------------------- predictive

TEST(Predictive, CollapsesWhenConcentrationVanishes) {
  Chain c = chain_of({{0, 0, 0, 0}});
  c.samples[0].atoms[0] = {0.3, 0.4, 0.5};
  c.samples[0].globals.M = 1e-12;
  Rng rng(1);
  const auto draws = predictive_random_effect_draws(c, 10000, rng);
  for (const auto& d : draws) EXPECT_EQ(d, c.samples[0].atoms[0]);
}

TEST(Predictive, FreshDrawRateMatchesPolyaUrn) {
  const Chain c = predictive_chain();
  Rng rng(2);
  const std::size_t n = 100000;
  const auto draws = predictive_random_effect_draws(c, n, rng);
  double fresh = 0.0;
  for (const auto& d : draws) {
    bool existing = false;
    for (const auto& a : c.samples[0].atoms) existing |= d == a;
    fresh += !existing;
  }
  double expected = 0.0;
  for (const auto& s : c.samples) expected += s.globals.M / (s.globals.M + 30.0);
  expected /= static_cast<double>(c.size());
  const double se = std::sqrt(expected * (1.0 - expected) / n);
  EXPECT_NEAR(fresh / n, expected, 3.0 * se);
}

TEST(Predictive, DrawsConcentrateOnTrueAtoms) {
  Chain c = predictive_chain();
  for (auto& s : c.samples) s.globals.M = 0.1;
  Rng rng(3);
  const auto draws = predictive_random_effect_draws(c, 30000, rng);
  std::vector<double> hits(3, 0.0);
  for (const auto& d : draws) {
    for (std::size_t h = 0; h < 3; ++h) {
      const auto& a = c.samples[0].atoms[h];
      if (std::abs(d.m1 - a.m1) < 0.5 && std::abs(d.delta - a.delta) < 0.5) hits[h] += 1.0;
    }
  }
  for (double h : hits) EXPECT_NEAR(h / 30000.0, 1.0 / 3.0, 0.02);
}

TEST(Predictive, OutcomesRespectConstraintAndCountLaw) {
  const Chain c = predictive_chain();
  Rng rng(4);
  const std::size_t n = 100000;
  const std::vector<double> x1{0.2, 0.7}, x2{0.9, 0.1};
  const auto a = predictive_outcome_draws(c, x1, n, rng);
  const auto b = predictive_outcome_draws(c, x2, n, rng);
  const int top = 200;
  std::vector<double> pa(top + 1, 0.0), pb(top + 1, 0.0), truth(top + 1, 0.0);
  for (const auto& d : a) {
    ASSERT_LE(total_time(d.gaps), d.survival);
    ASSERT_EQ(static_cast<long>(d.gaps.size()), d.count);
    pa[std::min<long>(d.count, top)] += 1.0 / n;
  }
  for (const auto& d : b) {
    ASSERT_LE(total_time(d.gaps), d.survival);
    pb[std::min<long>(d.count, top)] += 1.0 / n;
  }
  for (int k = 0; k < top; ++k) {
    for (const auto& s : c.samples) truth[k] += nb_pmf(k, s.globals.r, s.globals.lambda) / c.size();
  }
  truth[top] = 1.0 - std::accumulate(truth.begin(), truth.end() - 1, 0.0);
  double tv_a = 0.0, tv_ab = 0.0;
  for (int k = 0; k <= top; ++k) {
    tv_a += 0.5 * std::abs(pa[k] - truth[k]);
    tv_ab += 0.5 * std::abs(pa[k] - pb[k]);
  }
  EXPECT_LE(tv_a, 0.02);
  EXPECT_LE(tv_ab, 0.02);
}

TEST(Predictive, IncompleteDrawsKeepTheirCount) {
  // One atom with an explosive gap process and survival far below the gaps:
  // every N >= 1 exhausts a small attempt budget.
  Chain c;
  c.q = 1;
  c.individuals = 4;
  ModelState s;
  s.globals.beta = {0.0};
  s.globals.gamma = {0.0};
  s.globals.r = 2.0;
  s.globals.lambda = 3.0;
  s.globals.M = 1e-12;
  s.atoms = {{20.0, -5.0, -20.0}};
  s.assignments.assign(4, 0);
  s.latent.resize(4);
  c.samples.push_back(s);
  const std::vector<double> x{1.0};

  Rng rng(8);
  EXPECT_THROW(predictive_outcome_draws(c, x, 200, rng, 50), SimulationError);

  const auto draws = predictive_outcome_draws(c, x, 20000, rng, 50, true);
  std::vector<double> n;
  for (const auto& d : draws) {
    n.push_back(static_cast<double>(d.count));
    if (d.complete) {
      EXPECT_LE(total_time(d.gaps), d.survival);
    } else {
      EXPECT_TRUE(std::isnan(d.survival));
      EXPECT_TRUE(d.gaps.empty());
      EXPECT_GT(d.count, 0);
    }
  }
  // N is drawn before (Y, S) and is untouched by the failure: NB mean and
  // variance lambda + lambda^2 / r.
  EXPECT_NEAR(oracle::mean(n), 3.0, 4.0 * oracle::iid_se(n));
  EXPECT_NEAR(oracle::variance(n), 7.5, 0.4);
}

TEST(Predictive, RejectsCovariateLength) {
  const Chain c = predictive_chain();
  Rng rng(4);
  const std::vector<double> x{0.5};
  EXPECT_THROW(predictive_outcome_draws(c, x, 1, rng), std::invalid_argument);
}

// ---------------------------------------------------------------- Kaplan-Meier

TEST(KaplanMeier, AllEvents) {
  const std::vector<double> t{1.0, 2.0, 3.0};
  const auto km = kaplan_meier(t, std::vector<bool>(3, true));
  ASSERT_EQ(km.size(), 3u);
  EXPECT_NEAR(km[0].survival, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(km[1].survival, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(km[2].survival, 0.0);
}

TEST(KaplanMeier, AllCensoredIsFlat) {
  const std::vector<double> t{4.0, 1.0, 2.0};
  for (const auto& p : kaplan_meier(t, std::vector<bool>(3, false))) EXPECT_EQ(p.survival, 1.0);
}

TEST(KaplanMeier, TextbookTies) {
  // At 6: five at risk, two deaths -> 3/5. At 7: two at risk, one death ->
  // 3/5 * 1/2. At 10: censored, unchanged.
  const std::vector<double> t{6, 6, 6, 7, 10};
  const std::vector<bool> e{true, true, false, true, false};
  const auto km = kaplan_meier(t, e);
  ASSERT_EQ(km.size(), 3u);
  EXPECT_NEAR(km[0].survival, 0.6, 1e-15);
  EXPECT_EQ(km[0].at_risk, 5u);
  EXPECT_EQ(km[0].events, 2u);
  EXPECT_NEAR(km[1].survival, 0.3, 1e-15);
  EXPECT_EQ(km[1].at_risk, 2u);
  EXPECT_NEAR(km[2].survival, 0.3, 1e-15);
}

TEST(KaplanMeier, UncensoredEqualsEmpiricalSurvival) {
  std::mt19937_64 eng(6);
  std::exponential_distribution<double> e(0.3);
  std::vector<double> t(500);
  for (auto& v : t) v = e(eng);
  const auto km = kaplan_meier(t, std::vector<bool>(t.size(), true));
  for (const auto& p : km) {
    const double ecdf = std::count_if(t.begin(), t.end(), [&](double v) { return v <= p.time; }) / 500.0;
    EXPECT_NEAR(p.survival, 1.0 - ecdf, 1e-12);
  }
}

TEST(KaplanMeier, RejectsBadInput) {
  EXPECT_THROW(kaplan_meier(std::vector<double>{}, {}), std::invalid_argument);
  EXPECT_THROW(kaplan_meier(std::vector<double>{1.0}, {true, false}), std::invalid_argument);
  EXPECT_THROW(kaplan_meier(std::vector<double>{0.0}, {true}), std::invalid_argument);
}

TEST(KaplanMeier, ClusterCurvesUsePosteriorMeanLogSurvival) {
  Chain c = chain_of({{0, 0, 1}, {0, 0, 1}});
  c.samples[0].latent = {{0, {}, 2.0}, {0, {}, 4.0}, {0, {}, 9.0}};
  c.samples[1].latent = {{0, {}, 8.0}, {0, {}, 4.0}, {0, {}, 1.0}};
  const auto curves = cluster_kaplan_meier(c, Partition::canonical(c.samples[0].assignments));
  ASSERT_EQ(curves.size(), 2u);
  EXPECT_EQ(curves[0].size, 2u);
  EXPECT_EQ(curves[1].size, 1u);
  // Subjects 0 and 1 both have geometric-mean survival 4.
  ASSERT_EQ(curves[0].curve.size(), 1u);
  EXPECT_NEAR(curves[0].curve[0].time, 4.0, 1e-12);
  EXPECT_EQ(curves[0].curve[0].survival, 0.0);
  EXPECT_NEAR(curves[1].curve[0].time, 3.0, 1e-12);
}
