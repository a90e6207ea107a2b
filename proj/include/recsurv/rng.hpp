// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_RNG_HPP
#define RECSURV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace recsurv {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Seedable 64-bit Mersenne twister. Independent streams are derived from
// (seed, stream) through splitmix64, so chain k of a run with seed s always
// sees the same numbers regardless of how many other chains run.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::uint64_t mix = seed ^ (0x6a09e667f3bcc909ULL * (stream + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(detail::splitmix64(mix)),
                      static_cast<std::uint32_t>(detail::splitmix64(mix)),
                      static_cast<std::uint32_t>(detail::splitmix64(mix)),
                      static_cast<std::uint32_t>(detail::splitmix64(mix))};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Child generator for sub-stream `index`; does not advance this generator.
  Rng split(std::uint64_t index) const {
    std::uint64_t mix = stream_ * 0x9e3779b97f4a7c15ULL + index + 1;
    return Rng(seed_, detail::splitmix64(mix));
  }

  engine_type& engine() { return engine_; }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std_normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform()); }

  // Gamma with the given shape and rate.
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_) / rate;
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> dist(mean);
    return dist(engine_);
  }

  // Negative binomial with shape r and mean lambda (gamma-Poisson mixture).
  long negative_binomial(double r, double lambda) {
    return poisson(gamma(r, r / lambda));
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Draws an index with probability proportional to exp(log_weights[k]).
  std::size_t categorical_log(std::span<const double> log_weights) {
    if (log_weights.empty()) throw std::invalid_argument("categorical_log: no weights");
    double max = -INFINITY;
    for (double w : log_weights) max = std::max(max, w);
    if (!std::isfinite(max)) throw std::domain_error("categorical_log: no finite weight");
    double total = 0.0;
    scratch_.resize(log_weights.size());
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
      scratch_[k] = std::exp(log_weights[k] - max);
      total += scratch_[k];
    }
    double u = uniform() * total;
    for (std::size_t k = 0; k < scratch_.size(); ++k) {
      u -= scratch_[k];
      if (u <= 0.0) return k;
    }
    for (std::size_t k = scratch_.size(); k-- > 0;)
      if (scratch_[k] > 0.0) return k;
    return scratch_.size() - 1;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  engine_type engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
  std::vector<double> scratch_;
};

}  // namespace recsurv

#endif
