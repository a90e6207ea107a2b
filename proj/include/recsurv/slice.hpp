// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_SLICE_HPP
#define RECSURV_SLICE_HPP

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

#include "recsurv/rng.hpp"

namespace recsurv {

class SliceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SliceOptions {
  double width = 1.0;
  int max_steps = 50;
  int max_shrinks = 10000;
};

// One univariate slice-sampling transition (Neal 2003): stepping out with a
// budget of max_steps intervals split at random between the two sides,
// followed by shrinkage. Leaves exp(log_target) invariant.
//
// Throws SliceError when the starting point has non-finite log density, when
// the target returns NaN, or when shrinkage fails to terminate.
template <class LogTarget>
double slice_sample(LogTarget&& log_target, double x0, const SliceOptions& opt, Rng& rng) {
  const double f0 = log_target(x0);
  if (!std::isfinite(f0)) {
    std::ostringstream msg;
    msg << "slice_sample: log target at the current point x0=" << x0 << " is " << f0;
    throw SliceError(msg.str());
  }
  const double level = f0 - rng.exponential();

  double left = x0 - opt.width * rng.uniform();
  double right = left + opt.width;
  int left_budget = static_cast<int>(std::floor(opt.max_steps * rng.uniform()));
  int right_budget = opt.max_steps - 1 - left_budget;
  while (left_budget > 0 && log_target(left) > level) {
    left -= opt.width;
    --left_budget;
  }
  while (right_budget > 0 && log_target(right) > level) {
    right += opt.width;
    --right_budget;
  }

  for (int shrink = 0; shrink < opt.max_shrinks; ++shrink) {
    const double x1 = rng.uniform(left, right);
    const double f1 = log_target(x1);
    if (std::isnan(f1)) {
      std::ostringstream msg;
      msg << "slice_sample: log target is NaN at x=" << x1;
      throw SliceError(msg.str());
    }
    if (f1 > level) return x1;
    if (x1 < x0) {
      left = x1;
    } else if (x1 > x0) {
      right = x1;
    } else {
      return x0;
    }
  }
  std::ostringstream msg;
  msg << "slice_sample: shrinkage did not terminate after " << opt.max_shrinks
      << " steps (x0=" << x0 << ", interval=[" << left << ", " << right << "], log level="
      << level << ")";
  throw SliceError(msg.str());
}

}  // namespace recsurv

#endif
