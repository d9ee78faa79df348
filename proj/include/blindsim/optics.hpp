#pragma once

#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "blindsim/detector.hpp"
#include "blindsim/random.hpp"
#include "blindsim/selftest.hpp"
#include "blindsim/timeline.hpp"

namespace blindsim {

/// Blinding / fake-state attack on the quantum channel.
struct AttackScenario {
  double blind_power_level{0.0}; ///< W of CW blinding light; 0 disables the attack
  double fake_pulse_rate{0.0};   ///< 1/s
  double fake_peak_power{3e-6};  ///< W
  double fake_width{2e-9};       ///< s
  std::optional<double> stop_blind_at; ///< s; blinding ends here if set
  /// Emit fake pulses even when no blinding light is applied.
  bool fakes_without_blinding{false};

  void validate() const;
};

/// Local light emitter settings shared by all self-test plans.
struct EmitterSettings {
  double flag_peak_power{4e-11};  ///< W; energy must stay below the fake threshold
  double flag_photons{5.0};       ///< photons absorbed from one flag pulse
  double self_blind_power{2e-9};  ///< W of LE light while self-blinding
  double onset_width{1e-9};       ///< s, width of the onset marker pulse

  void validate() const;
};

/// Homogeneous Poisson arrivals at `rate` (1/s) over [0, duration_s).
std::vector<Photon> gen_signal_photons(double rate, double duration_s, RandomStream& rng,
                                       PhotonSource source = PhotonSource::Signal);

/// Poisson arrivals at `rate` over [begin, end).
std::vector<Photon> gen_photons(double rate, TimePs begin, TimePs end, PhotonSource source, RandomStream& rng);

/// Blinding segment from 0 to stop_blind_at (or the horizon) plus Poisson
/// fake pulses over the same span.
OpticalTimeline gen_attack(const AttackScenario& scenario, TimePs duration, RandomStream& rng);

/// LE stimulus for one scheduled test:
///   Salt      -> SALT photons at plan.salt_rate over the test interval
///   FlagPulse -> one FLAG pulse of width test_duration at test_start
///   SelfBlind -> LE_BLIND segment over the interval plus an onset FLAG pulse
///                that fires an armed detector with certainty
/// Throws ValidationError if a LE pulse would reach the fake-state energy or
/// the self-blinding power cannot blind the detector.
OpticalTimeline gen_le_schedule(const SelfTestPlan& plan, const EmitterSettings& emitter,
                                const DetectorParams& detector, TimePs duration, RandomStream& rng);

/// Union of fragments sharing one horizon, in canonical time order.
/// The result does not depend on the order of the fragments.
OpticalTimeline merge_timelines(std::span<const OpticalTimeline> fragments);
OpticalTimeline merge_timelines(std::initializer_list<OpticalTimeline> fragments);

} // namespace blindsim
