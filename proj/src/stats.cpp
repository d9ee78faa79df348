#include "blindsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "blindsim/error.hpp"
#include "blindsim/optics.hpp"

namespace blindsim {

double poisson_tail(double mean, std::int64_t k, Tail side) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ValidationError("mean", "must be finite and >= 0");
  if (side == Tail::Lower) {
    if (k < 0) return 0.0;
    if (mean == 0.0) return 1.0;
    // P(X <= k) = Q(k + 1, mean)
    return boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);
  }
  if (k <= 0) return 1.0;
  if (mean == 0.0) return 0.0;
  // P(X >= k) = P(k, mean)
  return boost::math::gamma_p(static_cast<double>(k), mean);
}

double binomial_tail(std::int64_t n, double p, std::int64_t k, Tail side) {
  if (n < 0) throw ValidationError("n", "must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p", "must lie in [0, 1]");
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  if (side == Tail::Lower) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    return boost::math::ibetac(kd + 1.0, nd - kd, p);
  }
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  return boost::math::ibeta(kd, nd - kd + 1.0, p);
}

Interval clopper_pearson_interval(std::int64_t successes, std::int64_t trials, double confidence) {
  if (trials < 0 || successes < 0 || successes > trials)
    throw ValidationError("successes", "must satisfy 0 <= successes <= trials");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence", "must lie in (0, 1)");
  if (trials == 0) return {0.0, 1.0};

  const double alpha = 1.0 - confidence;
  const auto s = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(s, n - s + 1.0, alpha / 2.0);
  ci.high = successes == trials ? 1.0 : boost::math::ibeta_inv(s + 1.0, n - s, 1.0 - alpha / 2.0);
  return ci;
}

// ---------------------------------------------------------------------------
// Histogram
// ---------------------------------------------------------------------------

Histogram::Histogram(std::vector<double> edges) : edges_{std::move(edges)} {
  for (std::size_t i = 1; i < edges_.size(); ++i)
    if (!(edges_[i] > edges_[i - 1])) throw ValidationError("histogram.edges", "must be strictly increasing");
  counts_.assign(edges_.size() > 1 ? edges_.size() - 1 : 0, 0);
  if (edges_.size() == 1) edges_.clear();
}

Histogram Histogram::uniform(double low, double high, double width) {
  if (!(width > 0.0) || !(high > low)) throw ValidationError("histogram", "need width > 0 and high > low");
  const auto n = static_cast<std::size_t>(std::ceil((high - low) / width - 1e-9));
  std::vector<double> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i) edges[i] = low + width * static_cast<double>(i);
  return Histogram{std::move(edges)};
}

Histogram Histogram::integer_counts(std::span<const std::int64_t> values) {
  if (values.empty()) return Histogram{};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(*hi - *lo + 2));
  for (std::int64_t k = *lo; k <= *hi + 1; ++k) edges.push_back(static_cast<double>(k));
  Histogram h{std::move(edges)};
  for (auto v : values) h.add(static_cast<double>(v));
  return h;
}

void Histogram::add(double value, std::uint64_t weight) {
  if (edges_.empty() || value < edges_.front() || value >= edges_.back()) {
    overflow_ += weight;
    return;
  }
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), value);
  counts_[static_cast<std::size_t>(it - edges_.begin()) - 1] += weight;
  total_ += weight;
}

double Histogram::mean() const {
  if (total_ == 0) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) sum += edges_[i] * static_cast<double>(counts_[i]);
  return sum / static_cast<double>(total_);
}

double Histogram::variance() const {
  if (total_ < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean();
  double ss = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const double dev = edges_[i] - m;
    ss += dev * dev * static_cast<double>(counts_[i]);
  }
  return ss / static_cast<double>(total_ - 1);
}

double Histogram::quantile(double q) const {
  if (total_ == 0) return std::numeric_limits<double>::quiet_NaN();
  const double target = q * static_cast<double>(total_);
  std::uint64_t cum = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    cum += counts_[i];
    if (counts_[i] > 0 && static_cast<double>(cum) >= target) return edges_[i];
  }
  return max_value();
}

double Histogram::min_value() const {
  for (std::size_t i = 0; i < counts_.size(); ++i)
    if (counts_[i] > 0) return edges_[i];
  return std::numeric_limits<double>::quiet_NaN();
}

double Histogram::max_value() const {
  for (std::size_t i = counts_.size(); i-- > 0;)
    if (counts_[i] > 0) return edges_[i];
  return std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t Histogram::count_at_most(double x) const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < counts_.size() && edges_[i] <= x; ++i) n += counts_[i];
  return n;
}

std::uint64_t Histogram::count_at_least(double x) const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i)
    if (edges_[i] >= x) n += counts_[i];
  return n;
}

void Histogram::write_csv(std::ostream& os) const {
  os << "bin_low,bin_high,count\n";
  for (std::size_t i = 0; i < counts_.size(); ++i) os << edges_[i] << ',' << edges_[i + 1] << ',' << counts_[i] << '\n';
}

// ---------------------------------------------------------------------------
// Count models
// ---------------------------------------------------------------------------

namespace {

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

bool is_calibrated(const CountModel& model) {
  if (const auto* e = std::get_if<EmpiricalModel>(&model)) return e->histogram.total() > 0;
  return true;
}

double model_tail(const CountModel& model, std::int64_t k, Tail side) {
  return std::visit(
      Overloaded{
          [&](const PoissonModel& m) { return poisson_tail(m.mean, k, side); },
          [&](const BinomialModel& m) { return binomial_tail(m.trials, m.p, k, side); },
          [&](const EmpiricalModel& m) {
            if (m.histogram.total() == 0) throw ValidationError("calibration", "empirical distribution is empty");
            const auto n = static_cast<double>(m.histogram.total());
            const auto kd = static_cast<double>(k);
            const auto r = side == Tail::Lower ? m.histogram.count_at_most(kd) : m.histogram.count_at_least(kd);
            return static_cast<double>(r) / n;
          },
      },
      model);
}

double model_mean(const CountModel& model) {
  return std::visit(Overloaded{
                        [](const PoissonModel& m) { return m.mean; },
                        [](const BinomialModel& m) { return static_cast<double>(m.trials) * m.p; },
                        [](const EmpiricalModel& m) { return m.histogram.mean(); },
                    },
                    model);
}

double lower_p_value(const CountModel& model, std::int64_t k) {
  if (const auto* e = std::get_if<EmpiricalModel>(&model)) {
    if (e->histogram.total() == 0) throw ValidationError("calibration", "empirical distribution is empty");
    const auto r = e->histogram.count_at_most(static_cast<double>(k));
    return static_cast<double>(r + 1) / static_cast<double>(e->histogram.total() + 1);
  }
  return model_tail(model, k, Tail::Lower);
}

// ---------------------------------------------------------------------------

Histogram count_distribution_oracle(const DetectorParams& params, double photon_rate, double window,
                                    std::int64_t n_trials, const RandomStream& rng, double warmup) {
  if (n_trials < 1) throw ValidationError("n_trials", "must be >= 1");
  if (!(window > 0.0)) throw ValidationError("window", "must be > 0");
  if (!(warmup >= 0.0)) throw ValidationError("warmup", "must be >= 0");

  const TimePs begin = to_ps(warmup);
  const TimePs end = begin + to_ps(window);
  const Detector detector{params};

  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_trials));
  for (std::int64_t i = 0; i < n_trials; ++i) {
    const auto trial = rng.split(static_cast<std::uint64_t>(i));
    auto source = trial.split("source");
    OpticalTimeline tl;
    tl.duration = end;
    tl.photons = gen_signal_photons(photon_rate, to_seconds(end), source);
    Detector det = detector;
    const auto clicks = det.run(tl, trial.split("detector"));
    counts[static_cast<std::size_t>(i)] = std::count_if(
        clicks.begin(), clicks.end(), [&](const ClickRecord& c) { return c.time >= begin && c.time < end; });
  }
  return Histogram::integer_counts(counts);
}

} // namespace blindsim
