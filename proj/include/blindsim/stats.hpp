#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "blindsim/detector.hpp"
#include "blindsim/random.hpp"
#include "blindsim/time.hpp"

namespace blindsim {

/// Lower: P(X <= k).  Upper: P(X >= k).  Both inclusive.
enum class Tail { Lower, Upper };

double poisson_tail(double mean, std::int64_t k, Tail side);
double binomial_tail(std::int64_t n, double p, std::int64_t k, Tail side);

struct Interval {
  double low{0.0};
  double high{1.0};
};

/// Exact (Clopper-Pearson) two-sided binomial confidence interval.
Interval clopper_pearson_interval(std::int64_t successes, std::int64_t trials, double confidence);

/// Binned distribution. Integer-count histograms use unit bins [k, k+1);
/// statistics treat each bin as the value of its lower edge.
class Histogram {
public:
  Histogram() = default;
  explicit Histogram(std::vector<double> edges);

  /// Fixed-width bins covering [low, high).
  static Histogram uniform(double low, double high, double width);

  /// Unit-width bins spanning min(values)..max(values).
  static Histogram integer_counts(std::span<const std::int64_t> values);

  /// Adds one observation; values outside the edges are counted as overflow.
  void add(double value, std::uint64_t weight = 1);

  [[nodiscard]] const std::vector<double>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<std::uint64_t>& counts() const { return counts_; }
  [[nodiscard]] std::size_t bins() const { return counts_.size(); }
  [[nodiscard]] std::uint64_t total() const { return total_; }
  [[nodiscard]] std::uint64_t overflow() const { return overflow_; }

  [[nodiscard]] double mean() const;
  [[nodiscard]] double variance() const;
  /// Smallest bin lower edge whose cumulative fraction reaches q.
  [[nodiscard]] double quantile(double q) const;
  /// Lower edge of the first / last non-empty bin.
  [[nodiscard]] double min_value() const;
  [[nodiscard]] double max_value() const;
  /// Number of binned observations with bin lower edge <= x (or >= x).
  [[nodiscard]] std::uint64_t count_at_most(double x) const;
  [[nodiscard]] std::uint64_t count_at_least(double x) const;

  /// CSV with header `bin_low,bin_high,count`.
  void write_csv(std::ostream& os) const;

  friend bool operator==(const Histogram&, const Histogram&) = default;

private:
  std::vector<double> edges_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_{0};
  std::uint64_t overflow_{0};
};

// ---------------------------------------------------------------------------
// Count models used as calibrated null / alternative distributions
// ---------------------------------------------------------------------------

struct PoissonModel {
  double mean{0.0};
};

struct BinomialModel {
  std::int64_t trials{0};
  double p{0.0};
};

struct EmpiricalModel {
  Histogram histogram;
};

using CountModel = std::variant<PoissonModel, BinomialModel, EmpiricalModel>;

/// Tail probability of a count model. Throws ValidationError for an empty
/// empirical model.
double model_tail(const CountModel& model, std::int64_t k, Tail side);
double model_mean(const CountModel& model);
bool is_calibrated(const CountModel& model);

/// P-value of observing at most `k` under `model`. Empirical models use the
/// Monte Carlo estimate (r + 1) / (n + 1).
double lower_p_value(const CountModel& model, std::int64_t k);

/// Brute-force distribution of detector click counts in a window of length
/// `window` (s) under Poisson photons at `photon_rate` (1/s). Each trial
/// runs `warmup` seconds first so the window starts in steady state.
Histogram count_distribution_oracle(const DetectorParams& params, double photon_rate, double window,
                                    std::int64_t n_trials, const RandomStream& rng,
                                    double warmup = 50e-6);

} // namespace blindsim
