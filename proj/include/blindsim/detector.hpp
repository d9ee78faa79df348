#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "blindsim/random.hpp"
#include "blindsim/time.hpp"
#include "blindsim/timeline.hpp"

namespace blindsim {

/// Behavioral parameters of a passively quenched single-photon APD.
/// Units are SI throughout.
struct DetectorParams {
  double efficiency{0.2};           ///< click probability per photon when armed
  double dark_rate{7e3};            ///< 1/s
  double dead_time{1e-6};           ///< s
  double afterpulse_prob{0.4};      ///< per click
  double afterpulse_tau{1e-6};      ///< s, mean delay after dead-time expiry
  bool afterpulse_cascade{true};    ///< afterpulses may afterpulse again
  double blind_power{500e-12};      ///< W
  double fake_energy{1e-15};        ///< J
  double recovery_click_prob{0.0};  ///< per downward crossing of blind_power
  double noise_rate{0.0};           ///< 1/s, electrical noise, fires even when blinded
  double max_rate_ref{5e5};         ///< 1/s, documented saturation rate (validation only)

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

enum class ClickCause { Signal, Dark, Afterpulse, Salt, Flag, Fake, Recovery, Noise };

inline constexpr int kClickCauseCount = 8;

std::string_view to_string(ClickCause c);

/// One detector output event. `cause` is simulation ground truth; protocol
/// code only ever sees `time`.
struct ClickRecord {
  TimePs time{0};
  ClickCause cause{ClickCause::Signal};

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

enum class DetectorMode { Armed, Dead, Blinded };

struct DetectorState {
  DetectorMode mode{DetectorMode::Armed};
  TimePs dead_until{0};
  double incident_cw_power{0.0};
  std::optional<TimePs> pending_afterpulse;
};

/// Event-driven detector state machine for a single trial.
///
/// Photons, pulses and CW edges come from the timeline; dark counts, noise
/// and afterpulses are drawn internally from independent child streams of
/// the supplied RandomStream. At most one afterpulse is pending at a time:
/// any click replaces it with that click's own afterpulse draw.
class Detector {
public:
  explicit Detector(DetectorParams params);

  /// Runs the whole timeline and returns the clicks in [0, duration).
  std::vector<ClickRecord> run(const OpticalTimeline& timeline, const RandomStream& rng);

  /// State at the end of the last run.
  [[nodiscard]] const DetectorState& state() const { return state_; }
  [[nodiscard]] const DetectorParams& params() const { return params_; }

private:
  DetectorParams params_;
  DetectorState state_;
};

std::vector<ClickRecord> process_timeline(const DetectorParams& params,
                                          const OpticalTimeline& timeline,
                                          const RandomStream& rng);

// ---------------------------------------------------------------------------
// Steady-state renewal analysis
// ---------------------------------------------------------------------------

/// Long-run behavior of the detector under a constant primary click rate
/// (photon rate x efficiency + dark rate), derived from the renewal cycle
/// between consecutive clicks.
struct SteadyState {
  double mean_cycle{0.0};          ///< s between clicks
  double click_rate{0.0};          ///< 1/s
  double armed_fraction{1.0};      ///< fraction of time not dead
  double afterpulse_fraction{0.0}; ///< fraction of clicks that are afterpulses
};

SteadyState predict_steady_state(const DetectorParams& params, double primary_rate);

/// Primary rate that makes the total click rate (afterpulses included) equal
/// `click_rate`. Throws ValidationError if the rate exceeds saturation.
double solve_primary_rate(const DetectorParams& params, double click_rate);

/// Click rate the dead time is calibrated against: 10 clicks per 200 us.
inline constexpr double kReferenceClickRate = 5e4;

/// Dead time for which the detector is armed `target_armed_fraction` of the
/// time while clicking at `click_rate`. Returns 1 ps when the detector is
/// idle (click_rate == 0).
double calibrate_dead_time(const DetectorParams& params, double target_armed_fraction,
                           double click_rate = kReferenceClickRate);

} // namespace blindsim
