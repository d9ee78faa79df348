#include "blindsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <string>

#include "blindsim/error.hpp"

namespace blindsim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ValidationError(std::string(key), "expected a number, got '" + std::string(text) + "'");
  return v;
}

template <class Int> Int parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    // Accept integral values written in floating-point form, e.g. 1e4.
    const double d = parse_double(key, text);
    if (d != std::floor(d) || std::fabs(d) > 9.0e15)
      throw ValidationError(std::string(key), "expected an integer, got '" + std::string(text) + "'");
    return static_cast<Int>(d);
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ValidationError(std::string(key), "expected true/false, got '" + std::string(text) + "'");
}

enum class Kind { Real, Integer, Bool, Text };

struct Field {
  const char* key;
  Kind kind;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define BLINDSIM_REAL(KEY, MEMBER)                                                                 \
  Field {                                                                                          \
    KEY, Kind::Real, [](const ExperimentConfig& c) { return format_double(c.MEMBER); },           \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_double(KEY, v); }          \
  }

#define BLINDSIM_TIME(KEY, MEMBER)                                                                 \
  Field {                                                                                          \
    KEY, Kind::Real, [](const ExperimentConfig& c) { return format_double(to_seconds(c.MEMBER)); }, \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = to_ps(parse_double(KEY, v)); }   \
  }

#define BLINDSIM_INT(KEY, MEMBER, TYPE)                                                            \
  Field {                                                                                          \
    KEY, Kind::Integer, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },       \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_int<TYPE>(KEY, v); }       \
  }

#define BLINDSIM_BOOL(KEY, MEMBER)                                                                 \
  Field {                                                                                          \
    KEY, Kind::Bool, [](const ExperimentConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }, \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_bool(KEY, v); }            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"scenario", Kind::Text,
            [](const ExperimentConfig& c) { return lower(to_string(c.scenario)); },
            [](ExperimentConfig& c, std::string_view v) { c.scenario = parse_scenario(v); }},
      BLINDSIM_INT("seed", seed, std::uint64_t),
      BLINDSIM_INT("trials", trials, std::int64_t),

      BLINDSIM_REAL("detector.efficiency", detector.efficiency),
      BLINDSIM_REAL("detector.dark_rate", detector.dark_rate),
      BLINDSIM_REAL("detector.dead_time", detector.dead_time),
      BLINDSIM_REAL("detector.afterpulse_prob", detector.afterpulse_prob),
      BLINDSIM_REAL("detector.afterpulse_tau", detector.afterpulse_tau),
      BLINDSIM_BOOL("detector.afterpulse_cascade", detector.afterpulse_cascade),
      BLINDSIM_REAL("detector.blind_power", detector.blind_power),
      BLINDSIM_REAL("detector.fake_energy", detector.fake_energy),
      BLINDSIM_REAL("detector.recovery_click_prob", detector.recovery_click_prob),
      BLINDSIM_REAL("detector.noise_rate", detector.noise_rate),
      BLINDSIM_REAL("detector.max_rate_ref", detector.max_rate_ref),

      BLINDSIM_REAL("source.signal_rate", signal_rate),

      BLINDSIM_REAL("attack.blind_power_level", attack.blind_power_level),
      BLINDSIM_REAL("attack.fake_pulse_rate", attack.fake_pulse_rate),
      BLINDSIM_REAL("attack.fake_peak_power", attack.fake_peak_power),
      BLINDSIM_REAL("attack.fake_width", attack.fake_width),
      Field{"attack.stop_blind_at", Kind::Real,
            [](const ExperimentConfig& c) {
              return c.attack.stop_blind_at ? format_double(*c.attack.stop_blind_at) : std::string("none");
            },
            [](ExperimentConfig& c, std::string_view v) {
              if (lower(trim(v)) == "none") c.attack.stop_blind_at.reset();
              else c.attack.stop_blind_at = parse_double("attack.stop_blind_at", v);
            }},
      BLINDSIM_BOOL("attack.fakes_without_blinding", attack.fakes_without_blinding),

      Field{"plan.strategy", Kind::Text,
            [](const ExperimentConfig& c) { return lower(to_string(c.plan.strategy)); },
            [](ExperimentConfig& c, std::string_view v) { c.plan.strategy = parse_strategy(v); }},
      BLINDSIM_TIME("plan.test_duration", plan.test_duration),
      BLINDSIM_REAL("plan.salt_rate", plan.salt_rate),
      BLINDSIM_TIME("plan.response_window", plan.response_window),
      BLINDSIM_INT("plan.count_threshold", plan.count_threshold, std::int64_t),

      BLINDSIM_REAL("emitter.flag_peak_power", emitter.flag_peak_power),
      BLINDSIM_REAL("emitter.flag_photons", emitter.flag_photons),
      BLINDSIM_REAL("emitter.self_blind_power", emitter.self_blind_power),
      BLINDSIM_REAL("emitter.onset_width", emitter.onset_width),

      BLINDSIM_REAL("trial.duration", trial_duration),
      BLINDSIM_REAL("trial.warmup", warmup),
      BLINDSIM_REAL("trial.baseline_window", baseline_window),
      BLINDSIM_INT("trial.tests", tests_per_trial, std::int64_t),
      BLINDSIM_REAL("trial.recovery_stop_fraction", recovery_stop_fraction),
      BLINDSIM_INT("calibration.salt_null_trials", salt_null_trials, std::int64_t),
  };
  return table;
}

#undef BLINDSIM_REAL
#undef BLINDSIM_TIME
#undef BLINDSIM_INT
#undef BLINDSIM_BOOL

const Field& find_field(std::string_view key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  throw ValidationError(std::string(key), "unknown configuration key");
}

} // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
  case Scenario::Normal: return "NORMAL";
  case Scenario::Manipulated: return "MANIPULATED";
  case Scenario::RecoveryAttack: return "RECOVERY_ATTACK";
  case Scenario::Custom: return "CUSTOM";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "normal") return Scenario::Normal;
  if (t == "manipulated") return Scenario::Manipulated;
  if (t == "recovery" || t == "recovery_attack") return Scenario::RecoveryAttack;
  if (t == "custom") return Scenario::Custom;
  throw ValidationError("scenario", "expected normal|manipulated|recovery|custom, got '" + std::string(text) + "'");
}

Strategy parse_strategy(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "salt") return Strategy::Salt;
  if (t == "flag" || t == "flag_pulse") return Strategy::FlagPulse;
  if (t == "selfblind" || t == "self_blind") return Strategy::SelfBlind;
  throw ValidationError("plan.strategy", "expected salt|flag|selfblind, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
  detector.validate();
  attack.validate();
  emitter.validate();
  if (!(signal_rate >= 0.0)) throw ValidationError("source.signal_rate", "must be >= 0");
  if (trials < 1) throw ValidationError("trials", "must be >= 1");
  if (!(trial_duration >= 0.0)) throw ValidationError("trial.duration", "must be >= 0");
  if (!(warmup >= 0.0)) throw ValidationError("trial.warmup", "must be >= 0");
  if (!(baseline_window >= 0.0)) throw ValidationError("trial.baseline_window", "must be >= 0");
  if (tests_per_trial < 0) throw ValidationError("trial.tests", "must be >= 0");
  if (!(recovery_stop_fraction >= 0.0 && recovery_stop_fraction < 1.0))
    throw ValidationError("trial.recovery_stop_fraction", "must lie in [0, 1)");
  if (salt_null_trials < 1) throw ValidationError("calibration.salt_null_trials", "must be >= 1");

  SelfTestPlan probe = plan;
  probe.test_start = 0;
  probe.validate(kNever);
  const TimePs duration = to_ps(trial_duration);
  if (duration > 0) {
    const TimePs needed = to_ps(warmup) + to_ps(baseline_window) + tests_per_trial * plan.footprint();
    if (needed > duration) throw ValidationError("trial.duration", "too short for warmup, baseline and tests");
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

KeyValues to_key_values(const ExperimentConfig& config) {
  KeyValues kv;
  for (const auto& f : fields()) kv.emplace(f.key, f.get(config));
  return kv;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, std::string_view key) {
  return find_field(key).get(config);
}

bool is_numeric_key(std::string_view key) {
  for (const auto& f : fields())
    if (key == f.key) return f.kind == Kind::Real || f.kind == Kind::Integer;
  return false;
}

} // namespace blindsim
