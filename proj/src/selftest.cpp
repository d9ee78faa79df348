#include "blindsim/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blindsim/error.hpp"

namespace blindsim {

std::string_view to_string(Strategy s) {
  switch (s) {
  case Strategy::Salt: return "SALT";
  case Strategy::FlagPulse: return "FLAG_PULSE";
  case Strategy::SelfBlind: return "SELF_BLIND";
  }
  return "?";
}

std::string_view to_string(Decision d) {
  switch (d) {
  case Decision::Normal: return "NORMAL";
  case Decision::NegativeManipulation: return "NEGATIVE_MANIPULATION";
  case Decision::PositiveManipulation: return "POSITIVE_MANIPULATION";
  case Decision::Both: return "BOTH";
  case Decision::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

void SelfTestPlan::validate(TimePs trial_duration) const {
  if (test_duration < 0) throw ValidationError("plan.test_duration", "must be >= 0");
  if (strategy == Strategy::FlagPulse && test_duration <= 0)
    throw ValidationError("plan.test_duration", "flag pulse width must be > 0");
  if (response_window <= 0) throw ValidationError("plan.response_window", "must be > 0");
  if (!(salt_rate >= 0.0) || !std::isfinite(salt_rate)) throw ValidationError("plan.salt_rate", "must be >= 0");
  if (count_threshold < 0) throw ValidationError("plan.count_threshold", "must be >= 0");
  if (test_start < 0 || test_start + footprint() > trial_duration)
    throw ValidationError("plan.test_start", "test interval must lie inside the trial");
}

std::vector<TimePs> click_times(std::span<const ClickRecord> clicks) {
  std::vector<TimePs> out;
  out.reserve(clicks.size());
  for (const auto& c : clicks) out.push_back(c.time);
  return out;
}

std::vector<SelfTestPlan> schedule_test_count(const SelfTestPlan& templ, std::int64_t count, TimePs window_start,
                                              TimePs window_end, RandomStream& rng) {
  if (count < 0) throw ValidationError("tests", "must be >= 0");
  const TimePs occupied = templ.footprint();
  const TimePs slack = window_end - window_start - count * occupied;
  if (window_start < 0 || slack < 0)
    throw ValidationError("duty_cycle", "requested tests do not fit in the trial");

  // Uniform over non-overlapping placements: sort `count` uniform offsets in
  // [0, slack] and shift the i-th by i footprints.
  std::vector<TimePs> offsets(static_cast<std::size_t>(count));
  for (auto& o : offsets)
    o = std::min(slack, static_cast<TimePs>(rng.uniform() * static_cast<double>(slack + 1)));
  std::sort(offsets.begin(), offsets.end());

  std::vector<SelfTestPlan> plans;
  plans.reserve(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    SelfTestPlan p = templ;
    p.test_start = window_start + offsets[i] + static_cast<TimePs>(i) * occupied;
    plans.push_back(p);
  }
  return plans;
}

std::vector<SelfTestPlan> schedule_tests(const SelfTestPlan& templ, TimePs trial_duration, double duty_cycle,
                                         RandomStream& rng) {
  if (!(duty_cycle > 0.0 && duty_cycle < 1.0)) throw ValidationError("duty_cycle", "must lie in (0, 1)");
  const double n = duty_cycle * static_cast<double>(trial_duration) / static_cast<double>(templ.footprint());
  return schedule_test_count(templ, std::llround(n), 0, trial_duration, rng);
}

// ---------------------------------------------------------------------------

std::int64_t count_in(std::span<const TimePs> times, TimePs begin, TimePs end) {
  if (end <= begin) return 0;
  const auto lo = std::lower_bound(times.begin(), times.end(), begin);
  const auto hi = std::lower_bound(lo, times.end(), end);
  return hi - lo;
}

Verdict evaluate_salt(const SelfTestPlan& plan, std::span<const TimePs> times, const CountModel& normal_null) {
  Verdict v;
  if (plan.test_duration <= 0) return v;
  v.observed_count = count_in(times, plan.test_start, plan.test_start + plan.test_duration);
  v.decision = v.observed_count >= plan.count_threshold ? Decision::Normal : Decision::NegativeManipulation;
  v.p_value = lower_p_value(normal_null, v.observed_count);
  return v;
}

Verdict evaluate_flag_pulse(const SelfTestPlan& plan, std::span<const TimePs> times) {
  Verdict v;
  v.observed_count = count_in(times, plan.test_start, plan.test_start + plan.response_window);
  v.flag_seen = v.observed_count > 0;
  v.decision = v.flag_seen ? Decision::Normal : Decision::NegativeManipulation;
  v.p_value = v.flag_seen ? 1.0 : 0.0;
  return v;
}

Verdict evaluate_flag_pulses(std::span<const SelfTestPlan> plans, std::span<const TimePs> times,
                             const FlagRule& rule) {
  Verdict v;
  if (plans.empty()) return v;
  std::int64_t responses = 0;
  for (const auto& p : plans)
    if (evaluate_flag_pulse(p, times).flag_seen) ++responses;
  const auto n = static_cast<std::int64_t>(plans.size());
  v.observed_count = responses;
  v.flag_seen = responses > 0;
  v.decision = responses >= rule.min_responses ? Decision::Normal : Decision::NegativeManipulation;
  v.p_value = binomial_tail(n, rule.normal_response_prob, responses, Tail::Lower);
  return v;
}

FlagRule choose_flag_rule(std::int64_t pulses, double normal_response_prob, double manipulated_response_prob) {
  if (pulses < 1) throw ValidationError("pulses", "must be >= 1");
  const CountModel h0 = BinomialModel{pulses, normal_response_prob};
  const CountModel h1 = BinomialModel{pulses, manipulated_response_prob};
  FlagRule rule;
  rule.normal_response_prob = normal_response_prob;
  rule.min_responses = choose_threshold(Strategy::FlagPulse, h0, h1, 0, pulses + 1);
  return rule;
}

Verdict evaluate_self_blind(const SelfTestPlan& plan, std::span<const TimePs> times, const SelfBlindNull& null) {
  Verdict v;
  if (plan.test_duration <= 0) return v;
  const TimePs onset_end = plan.test_start + std::min(plan.response_window, plan.test_duration);
  const TimePs blind_end = plan.test_start + plan.test_duration;
  v.flag_seen = count_in(times, plan.test_start, onset_end) > 0;
  v.in_blind_clicks = count_in(times, onset_end, blind_end);
  v.observed_count = count_in(times, plan.test_start, blind_end);

  const bool silent = v.in_blind_clicks == 0;
  if (v.flag_seen) v.decision = silent ? Decision::Normal : Decision::PositiveManipulation;
  else v.decision = silent ? Decision::NegativeManipulation : Decision::Both;

  const double p_flag = v.flag_seen ? 1.0 : 1.0 - null.onset_prob;
  v.p_value = std::clamp(p_flag * poisson_tail(null.in_blind_mean, v.in_blind_clicks, Tail::Upper), 0.0, 1.0);
  return v;
}

Verdict evaluate(const SelfTestPlan& plan, std::span<const TimePs> times, const CountModel& salt_null,
                 const SelfBlindNull& blind_null) {
  switch (plan.strategy) {
  case Strategy::Salt: return evaluate_salt(plan, times, salt_null);
  case Strategy::FlagPulse: return evaluate_flag_pulse(plan, times);
  case Strategy::SelfBlind: return evaluate_self_blind(plan, times, blind_null);
  }
  return {};
}

// ---------------------------------------------------------------------------

namespace {

void check_family(Strategy strategy, const CountModel& m, const char* field) {
  if (!is_calibrated(m)) throw ValidationError(field, "uncalibrated (empty) distribution");
  const bool binomial = std::holds_alternative<BinomialModel>(m);
  const bool poisson = std::holds_alternative<PoissonModel>(m);
  if (strategy == Strategy::Salt && binomial)
    throw ValidationError(field, "salt test needs a count distribution, not a binomial response model");
  if (strategy != Strategy::Salt && poisson)
    throw ValidationError(field, "pulse tests need a binomial response model");
}

} // namespace

ErrorRates decision_error_rates(Strategy strategy, const CountModel& h0, const CountModel& h1,
                                std::int64_t threshold) {
  check_family(strategy, h0, "calibration.h0");
  check_family(strategy, h1, "calibration.h1");
  if (threshold < 0) throw ValidationError("threshold", "must be >= 0");

  ErrorRates r;
  if (model_mean(h1) > model_mean(h0)) {
    r.false_alarm = model_tail(h0, threshold, Tail::Upper);
    r.miss = model_tail(h1, threshold - 1, Tail::Lower);
  } else {
    r.false_alarm = model_tail(h0, threshold - 1, Tail::Lower);
    r.miss = model_tail(h1, threshold, Tail::Upper);
  }
  return r;
}

std::int64_t choose_threshold(Strategy strategy, const CountModel& h0, const CountModel& h1, std::int64_t lo,
                              std::int64_t hi) {
  if (lo < 0 || hi < lo) throw ValidationError("threshold range", "need 0 <= lo <= hi");
  std::int64_t best = lo;
  double best_err = 2.0;
  for (std::int64_t t = lo; t <= hi; ++t) {
    const auto r = decision_error_rates(strategy, h0, h1, t);
    const double err = std::max(r.false_alarm, r.miss);
    if (err < best_err) {
      best_err = err;
      best = t;
    }
  }
  return best;
}

} // namespace blindsim
