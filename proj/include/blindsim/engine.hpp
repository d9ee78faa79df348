#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "blindsim/config.hpp"
#include "blindsim/detector.hpp"
#include "blindsim/selftest.hpp"
#include "blindsim/stats.hpp"

namespace blindsim {

// ---------------------------------------------------------------------------
// Reference operating point of a passively quenched InGaAs APD
// ---------------------------------------------------------------------------

inline constexpr double kReferenceWindow = 200e-6;       ///< s, count window T
inline constexpr double kSaltTestMean = 100.0;           ///< clicks per T under salt light
inline constexpr double kFlagResponseProb = 0.934;       ///< flag pulse response within 60 ns
inline constexpr double kOnsetResponseProb = 0.976;      ///< self-blind onset response within 60 ns
inline constexpr double kInBlindNoiseFraction = 8.0 / 7608.0; ///< runs with an in-blind click
inline constexpr double kBlindPower = 500e-12;           ///< W, minimal blinding power
inline constexpr double kFakePeakPower = 3e-6;           ///< W
inline constexpr double kFakeWidth = 2e-9;               ///< s
inline constexpr double kFlagWidth = 25e-9;              ///< s
inline constexpr double kResponseWindow = 60e-9;         ///< s

/// Detector calibrated to the reference operating point: dead time from the
/// onset response probability, efficiency such that a 5-photon flag pulse
/// reproduces the flag response probability, electrical noise from the
/// in-blind event fraction.
DetectorParams reference_detector();

/// Fully calibrated experiment for a scenario and self-test strategy.
ExperimentConfig reference_config(Scenario scenario, Strategy strategy);

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TestOutcome {
  SelfTestPlan plan;
  Verdict verdict;
  /// Click times relative to test_start within [0, kResponseTrace).
  std::vector<TimePs> response_offsets;

  friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

inline constexpr TimePs kResponseTrace = 200'000; ///< 200 ns

struct TrialResult {
  std::int64_t trial_index{0};
  std::uint64_t seed{0}; ///< key of the trial's random stream
  std::int64_t baseline_count{0};
  std::vector<TestOutcome> tests;
  std::array<std::int64_t, kClickCauseCount> cause_counts{};
  std::int64_t total_clicks{0};

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

/// Per-experiment state derived deterministically from the config: the
/// calibrated salt-test null distribution.
struct EngineContext {
  ExperimentConfig config;
  CountModel salt_null{PoissonModel{kSaltTestMean}};
};

EngineContext prepare(const ExperimentConfig& config);

/// schedule -> sources -> merge -> detector -> evaluate, for one trial.
TrialResult run_trial(const EngineContext& context, std::int64_t trial_index);
TrialResult run_trial(const ExperimentConfig& config, std::int64_t trial_index);

struct ExperimentSummary {
  Histogram baseline_counts;   ///< clicks in the LE-off window
  Histogram test_counts;       ///< clicks in the test interval (salt / self-blind)
  Histogram in_blind_counts;   ///< self-blind clicks after the response window
  Histogram response_offsets;  ///< 10 ns bins over [0, 200 ns) after each test start
  std::int64_t tests{0};
  std::int64_t flags_seen{0};
  std::array<std::int64_t, 5> decisions{}; ///< indexed by Decision
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  ExperimentSummary summary;
};

/// Runs all trials. `threads` only changes wall time, never the result.
ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 1);

ExperimentSummary summarize(const ExperimentConfig& config, const std::vector<TrialResult>& trials);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  double value{0.0};
  double normal_accuracy{0.0};      ///< normal tests judged NORMAL
  double manipulated_accuracy{0.0}; ///< attacked tests judged manipulated
  double balanced_accuracy{0.0};
  double false_alarm_rate{0.0};     ///< 1 - normal_accuracy
  double miss_rate{0.0};            ///< attacked tests judged NORMAL
  double normal_mean_count{0.0};
  double manipulated_mean_count{0.0};
};

/// For each value of the numeric field `path`, runs the config as a normal
/// experiment and as an attacked one (the config's own scenario, or
/// MANIPULATED if that is NORMAL) and reports verdict accuracy.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& path,
                            const std::vector<double>& values, unsigned threads = 1);

} // namespace blindsim
