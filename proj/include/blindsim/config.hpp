#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "blindsim/detector.hpp"
#include "blindsim/optics.hpp"
#include "blindsim/selftest.hpp"

namespace blindsim {

enum class Scenario { Normal, Manipulated, RecoveryAttack, Custom };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);
Strategy parse_strategy(std::string_view text);

/// Everything needed to reproduce an experiment. All quantities in SI units.
struct ExperimentConfig {
  Scenario scenario{Scenario::Normal};
  DetectorParams detector;
  double signal_rate{0.0}; ///< legitimate photon arrival rate at the detector (1/s)
  AttackScenario attack;
  SelfTestPlan plan;       ///< template; test_start is drawn per trial
  EmitterSettings emitter;
  double trial_duration{1e-3};
  double warmup{100e-6};          ///< no tests before this time
  double baseline_window{200e-6}; ///< LE-off count window right after warmup
  std::int64_t tests_per_trial{1};
  double recovery_stop_fraction{0.5}; ///< where in the first test the remote blinding stops
  std::int64_t salt_null_trials{2000}; ///< simulated windows for the salt null distribution
  std::int64_t trials{1000};
  std::uint64_t seed{1};

  /// Throws ValidationError naming the offending dotted key.
  void validate() const;
};

/// Flat key/value view of a config with dotted keys, e.g.
/// `detector.dead_time = 4.8e-07`. Numbers use shortest round-trip form.
using KeyValues = std::map<std::string, std::string>;

std::vector<std::string> config_keys();
KeyValues to_key_values(const ExperimentConfig& config);
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& config, std::string_view key);
/// True if `key` names a numeric field that can be swept.
bool is_numeric_key(std::string_view key);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace blindsim
