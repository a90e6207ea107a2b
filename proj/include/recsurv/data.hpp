// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_DATA_HPP
#define RECSURV_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recsurv {

// Raised when input data break a structural constraint. `issues` holds one
// human-readable entry per offending row or index.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& s : issues) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> issues_;
};

// Log gap times Y_1..Y_N, in log days.
using LogGaps = std::vector<double>;

// One subject. Event times are in days since the origin of the recurrence
// process (T_0 = 0). When survival is observed, censor_time is the survival
// time; otherwise the subject is known to be alive at censor_time.
struct Individual {
  std::vector<double> covariates;
  std::vector<double> event_times;
  double censor_time = 0.0;
  bool survival_observed = false;

  std::size_t observed_events() const { return event_times.size(); }
  bool censored() const { return !survival_observed; }

  friend bool operator==(const Individual&, const Individual&) = default;
};

struct Dataset {
  std::vector<Individual> individuals;
  std::size_t q = 0;

  std::size_t size() const { return individuals.size(); }
  const Individual& operator[](std::size_t i) const { return individuals[i]; }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Y_j = log(T_j - T_{j-1}) with T_0 = 0.
inline LogGaps to_log_gaps(std::span<const double> event_times) {
  LogGaps gaps(event_times.size());
  double prev = 0.0;
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    const double t = event_times[j];
    if (!(t > prev) || !std::isfinite(t)) {
      throw ValidationError({"event time at index " + std::to_string(j) + " (" +
                             std::to_string(t) +
                             ") is not strictly greater than the previous time (" +
                             std::to_string(prev) + ")"});
    }
    gaps[j] = std::log(t - prev);
    prev = t;
  }
  return gaps;
}

// Inverse of to_log_gaps: cumulative sums of exp(Y_j).
inline std::vector<double> from_log_gaps(std::span<const double> gaps) {
  std::vector<double> times(gaps.size());
  double t = 0.0;
  for (std::size_t j = 0; j < gaps.size(); ++j) {
    if (!std::isfinite(gaps[j])) {
      throw std::domain_error("log gap at index " + std::to_string(j) + " is not finite");
    }
    t += std::exp(gaps[j]);
    if (!std::isfinite(t)) {
      throw std::overflow_error("event time overflow at index " + std::to_string(j));
    }
    times[j] = t;
  }
  return times;
}

// T_N for a full log-gap vector.
inline double total_time(std::span<const double> gaps) {
  double t = 0.0;
  for (double y : gaps) t += std::exp(y);
  return t;
}

// One subject as read from an input file, before validation. `label` names
// the source (e.g. "id 17 (line 42)") in error messages.
struct RawIndividual {
  std::string label;
  std::vector<double> covariates;
  std::vector<double> event_times;
  double censor_time = 0.0;
  bool survival_observed = false;
};

namespace detail {

inline void check_individual(const std::string& label, const Individual& ind, std::size_t q,
                             std::vector<std::string>& issues) {
  if (ind.covariates.size() != q) {
    issues.push_back(label + ": expected " + std::to_string(q) + " covariates, found " +
                     std::to_string(ind.covariates.size()));
  }
  for (std::size_t k = 0; k < ind.covariates.size(); ++k) {
    if (!std::isfinite(ind.covariates[k])) {
      issues.push_back(label + ": covariate " + std::to_string(k + 1) + " is not finite");
    }
  }
  if (!(ind.censor_time > 0.0) || !std::isfinite(ind.censor_time)) {
    issues.push_back(label + ": censor time must be positive and finite");
  }
  double prev = 0.0;
  for (std::size_t j = 0; j < ind.event_times.size(); ++j) {
    const double t = ind.event_times[j];
    if (t == prev && j > 0) {
      issues.push_back(label + ": duplicate event time " + std::to_string(t));
    } else if (!(t > prev) || !std::isfinite(t)) {
      issues.push_back(label + ": event " + std::to_string(j + 1) + " at time " +
                       std::to_string(t) + " is not after the previous event");
    }
    if (t > ind.censor_time) {
      issues.push_back(label + ": event at time " + std::to_string(t) +
                       " exceeds censor time " + std::to_string(ind.censor_time));
    }
    prev = t;
  }
}

}  // namespace detail

// Builds a Dataset from raw rows, collecting every violated constraint before
// throwing. Covariate dimension is taken from the first row.
inline Dataset validate_dataset(const std::vector<RawIndividual>& rows) {
  std::vector<std::string> issues;
  if (rows.empty()) throw ValidationError({"dataset has no individuals"});
  Dataset data;
  data.q = rows.front().covariates.size();
  if (data.q == 0) issues.push_back(rows.front().label + ": no covariates");
  data.individuals.reserve(rows.size());
  for (const auto& row : rows) {
    Individual ind{row.covariates, row.event_times, row.censor_time, row.survival_observed};
    detail::check_individual(row.label, ind, data.q, issues);
    data.individuals.push_back(std::move(ind));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return data;
}

// Re-checks an in-memory dataset. Returns it unchanged when valid. An empty
// dataset is accepted here (it is the prior-only configuration of the sampler).
inline const Dataset& validate_dataset(const Dataset& data) {
  std::vector<std::string> issues;
  if (data.q == 0) issues.push_back("dataset has q = 0");
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::check_individual("individual " + std::to_string(i), data[i], data.q, issues);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return data;
}

struct DatasetSummary {
  std::size_t individuals = 0;
  std::size_t total_events = 0;
  std::size_t censored = 0;
  std::size_t max_events = 0;
};

inline DatasetSummary summarize(const Dataset& data) {
  DatasetSummary s;
  s.individuals = data.size();
  for (const auto& ind : data.individuals) {
    s.total_events += ind.observed_events();
    s.max_events = std::max(s.max_events, ind.observed_events());
    if (ind.censored()) ++s.censored;
  }
  return s;
}

}  // namespace recsurv

#endif
