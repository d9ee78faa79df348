#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "blindsim/detector.hpp"
#include "blindsim/random.hpp"
#include "blindsim/stats.hpp"
#include "blindsim/time.hpp"

namespace blindsim {

/// Self-testing strategies driven by the receiver's local light emitter.
///
///   Salt       - LE at low power for T; an unblinded detector shows excess counts.
///   FlagPulse  - short few-photon LE pulse; an unblinded detector almost always clicks.
///   SelfBlind  - LE blinds the detector for T; expect one onset click, then silence.
enum class Strategy { Salt, FlagPulse, SelfBlind };

enum class Decision { Normal, NegativeManipulation, PositiveManipulation, Both, Inconclusive };

std::string_view to_string(Strategy s);
std::string_view to_string(Decision d);

struct SelfTestPlan {
  Strategy strategy{Strategy::Salt};
  TimePs test_start{0};
  /// T for Salt / SelfBlind, pulse width for FlagPulse.
  TimePs test_duration{to_ps(200e-6)};
  /// LE photon arrival rate at the detector during a salt test (1/s).
  double salt_rate{0.0};
  TimePs response_window{to_ps(60e-9)};
  std::int64_t count_threshold{50};

  /// Time the plan reserves on the trial timeline.
  [[nodiscard]] TimePs footprint() const { return std::max(test_duration, response_window); }

  /// Throws ValidationError if the plan does not fit in [0, trial_duration).
  void validate(TimePs trial_duration) const;

  friend bool operator==(const SelfTestPlan&, const SelfTestPlan&) = default;
};

struct Verdict {
  Decision decision{Decision::Inconclusive};
  std::int64_t observed_count{0};
  bool flag_seen{false};
  std::int64_t in_blind_clicks{0};
  double p_value{1.0};

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Observable view of a click list: timestamps only.
std::vector<TimePs> click_times(std::span<const ClickRecord> clicks);

/// Places `count` non-overlapping copies of `templ` uniformly at random in
/// [window_start, window_end). Sorted by start time.
std::vector<SelfTestPlan> schedule_test_count(const SelfTestPlan& templ, std::int64_t count,
                                              TimePs window_start, TimePs window_end, RandomStream& rng);

/// Schedules round(duty_cycle * trial_duration / footprint) tests over the
/// whole trial.
std::vector<SelfTestPlan> schedule_tests(const SelfTestPlan& templ, TimePs trial_duration, double duty_cycle,
                                         RandomStream& rng);

// ---------------------------------------------------------------------------
// Evaluation. `times` must be sorted; nothing else about the clicks is seen.
// ---------------------------------------------------------------------------

std::int64_t count_in(std::span<const TimePs> times, TimePs begin, TimePs end);

/// Counts clicks in [start, start + T); NORMAL iff count >= threshold.
/// `normal_null` is the calibrated count distribution of a normally
/// operating detector under salt light; p_value is its lower tail.
Verdict evaluate_salt(const SelfTestPlan& plan, std::span<const TimePs> times, const CountModel& normal_null);

/// Single pulse: NORMAL iff a click falls in [start, start + window).
Verdict evaluate_flag_pulse(const SelfTestPlan& plan, std::span<const TimePs> times);

/// Decision rule for a batch of flag pulses.
struct FlagRule {
  std::int64_t min_responses{1};
  double normal_response_prob{0.934};
};

/// Aggregate over many pulses: NORMAL iff responses >= rule.min_responses.
/// observed_count is the number of responding pulses; p_value is the
/// binomial lower tail under the normal response probability.
Verdict evaluate_flag_pulses(std::span<const SelfTestPlan> plans, std::span<const TimePs> times,
                             const FlagRule& rule);

/// Smallest response count threshold minimizing the larger of the two error
/// probabilities for `pulses` pulses.
FlagRule choose_flag_rule(std::int64_t pulses, double normal_response_prob, double manipulated_response_prob);

/// Null model for the self-blind p-value: onset click probability and mean
/// number of in-blind clicks of an unmanipulated detector.
struct SelfBlindNull {
  double onset_prob{0.976};
  double in_blind_mean{8.0 / 7608.0};
};

///                 no in-blind clicks        in-blind clicks
///   onset flag    NORMAL                    POSITIVE_MANIPULATION
///   no flag       NEGATIVE_MANIPULATION     BOTH
Verdict evaluate_self_blind(const SelfTestPlan& plan, std::span<const TimePs> times,
                            const SelfBlindNull& null = {});

/// Dispatches on plan.strategy.
Verdict evaluate(const SelfTestPlan& plan, std::span<const TimePs> times, const CountModel& salt_null,
                 const SelfBlindNull& blind_null = {});

// ---------------------------------------------------------------------------
// Error analysis
// ---------------------------------------------------------------------------

struct ErrorRates {
  double false_alarm{0.0};
  double miss{0.0};
};

/// Error probabilities of a count threshold test between `h0` and `h1`.
///
/// The rejection region lies on the side of h1: if h1 has the larger mean
/// the test rejects h0 when X >= threshold, otherwise when X < threshold.
/// false_alarm = P(reject | h0), miss = P(accept | h1). Salt tests take
/// Poisson or empirical models, pulse-based tests binomial or empirical.
ErrorRates decision_error_rates(Strategy strategy, const CountModel& h0, const CountModel& h1,
                                std::int64_t threshold);

/// Threshold in [lo, hi] minimizing max(false_alarm, miss); ties go to the
/// smallest threshold.
std::int64_t choose_threshold(Strategy strategy, const CountModel& h0, const CountModel& h1, std::int64_t lo,
                              std::int64_t hi);

} // namespace blindsim
