// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>

#include <cmath>

#include "recsurv/slice.hpp"
#include "support/oracles.hpp"

using namespace recsurv;

namespace {

std::vector<double> run(const std::function<double(double)>& f, double x0, long n, std::uint64_t seed,
                        SliceOptions opt = {}) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  double x = x0;
  for (long k = 0; k < n; ++k) {
    x = slice_sample(f, x, opt, rng);
    out.push_back(x);
  }
  return out;
}

std::vector<double> thin(const std::vector<double>& x, std::size_t step) {
  std::vector<double> out;
  for (std::size_t k = 0; k < x.size(); k += step) out.push_back(x[k]);
  return out;
}

}  // namespace

TEST(Slice, StandardNormalMoments) {
  const auto x = run([](double v) { return -0.5 * v * v; }, 0.0, 100000, 42);
  EXPECT_NEAR(oracle::mean(x), 0.0, 0.02);
  EXPECT_NEAR(oracle::variance(x), 1.0, 0.05);
  const auto t = thin(x, 5);
  EXPECT_GT(oracle::ks_pvalue(oracle::ks_statistic(t, oracle::std_normal_cdf), t.size()), 1e-3);
}

TEST(Slice, UniformStaysInSupport) {
  auto f = [](double v) { return (v >= 0.0 && v <= 1.0) ? 0.0 : -INFINITY; };
  const auto x = run(f, 0.5, 50000, 7);
  for (double v : x) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  const auto t = thin(x, 5);
  const double d = oracle::ks_statistic(t, [](double v) { return std::clamp(v, 0.0, 1.0); });
  EXPECT_GT(oracle::ks_pvalue(d, t.size()), 1e-3);
}

TEST(Slice, HalfLineExponential) {
  auto f = [](double v) { return v > 0.0 ? -2.0 * v : -INFINITY; };
  const auto x = run(f, 1.0, 100000, 9);
  for (double v : x) ASSERT_GT(v, 0.0);
  EXPECT_NEAR(oracle::mean(x), 0.5, 4.0 * oracle::batch_means_se(x));
}

TEST(Slice, TinyWidthExhaustsBudgetButStaysValid) {
  // With width 0.01 and 5 steps the bracket is far narrower than the slice;
  // the draw is still a valid transition, just a local one.
  SliceOptions opt;
  opt.width = 0.01;
  opt.max_steps = 5;
  const auto x = run([](double v) { return -0.5 * v * v; }, 0.0, 200000, 3, opt);
  for (double v : x) ASSERT_TRUE(std::isfinite(v));
  EXPECT_NEAR(oracle::mean(x), 0.0, 5.0 * oracle::batch_means_se(x));
}

TEST(Slice, NonFiniteStartRaises) {
  Rng rng(1);
  auto f = [](double v) { return v > 0.0 ? 0.0 : -INFINITY; };
  EXPECT_THROW(slice_sample(f, -1.0, {}, rng), SliceError);
  try {
    slice_sample(f, -1.0, {}, rng);
  } catch (const SliceError& e) {
    EXPECT_NE(std::string(e.what()).find("x0=-1"), std::string::npos) << e.what();
  }
}

TEST(Slice, NanTargetRaises) {
  Rng rng(1);
  auto f = [](double v) { return std::abs(v) > 0.3 ? NAN : 0.0; };
  double x = 0.0;
  bool raised = false;
  for (int k = 0; k < 100 && !raised; ++k) {
    try {
      x = slice_sample(f, x, {}, rng);
    } catch (const SliceError&) {
      raised = true;
    }
  }
  EXPECT_TRUE(raised);
}

TEST(Slice, DegenerateTargetRaisesAfterShrinkLimit) {
  // Positive mass only at the exact starting point: shrinkage either collapses
  // onto x0 or gives up, never returns another point.
  SliceOptions opt;
  opt.max_shrinks = 20;
  Rng rng(5);
  auto f = [](double v) { return v == 0.25 ? 0.0 : -INFINITY; };
  EXPECT_THROW(slice_sample(f, 0.25, opt, rng), SliceError);
  opt.max_shrinks = 10000;
  try {
    EXPECT_EQ(slice_sample(f, 0.25, opt, rng), 0.25);
  } catch (const SliceError&) {
  }
}

TEST(Slice, DeterministicForSeed) {
  auto f = [](double v) { return -std::abs(v); };
  EXPECT_EQ(run(f, 0.0, 1000, 77), run(f, 0.0, 1000, 77));
  EXPECT_NE(run(f, 0.0, 1000, 77), run(f, 0.0, 1000, 78));
}
