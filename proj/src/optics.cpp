#include "blindsim/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "blindsim/error.hpp"

namespace blindsim {

void AttackScenario::validate() const {
  if (!(blind_power_level >= 0.0)) throw ValidationError("attack.blind_power_level", "must be >= 0");
  if (!(fake_pulse_rate >= 0.0)) throw ValidationError("attack.fake_pulse_rate", "must be >= 0");
  if (!(fake_peak_power >= 0.0)) throw ValidationError("attack.fake_peak_power", "must be >= 0");
  if (!(fake_width > 0.0) || to_ps(fake_width) <= 0) throw ValidationError("attack.fake_width", "must be > 0");
  if (stop_blind_at && !(*stop_blind_at >= 0.0)) throw ValidationError("attack.stop_blind_at", "must be >= 0");
}

void EmitterSettings::validate() const {
  if (!(flag_peak_power >= 0.0)) throw ValidationError("emitter.flag_peak_power", "must be >= 0");
  if (!(flag_photons >= 0.0)) throw ValidationError("emitter.flag_photons", "must be >= 0");
  if (!(self_blind_power >= 0.0)) throw ValidationError("emitter.self_blind_power", "must be >= 0");
  if (!(onset_width > 0.0) || to_ps(onset_width) <= 0) throw ValidationError("emitter.onset_width", "must be > 0");
}

std::vector<Photon> gen_photons(double rate, TimePs begin, TimePs end, PhotonSource source, RandomStream& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ValidationError("rate", "must be finite and >= 0");
  std::vector<Photon> out;
  if (rate == 0.0 || end <= begin) return out;

  const double mean_gap = 1.0 / rate;
  const double span_s = to_seconds(end - begin);
  out.reserve(static_cast<std::size_t>(rate * span_s * 1.1) + 8);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(mean_gap);
    if (t >= span_s) break;
    const TimePs at = begin + static_cast<TimePs>(t * static_cast<double>(kPsPerSecond));
    if (at >= end) break;
    out.push_back({at, source});
  }
  return out;
}

std::vector<Photon> gen_signal_photons(double rate, double duration_s, RandomStream& rng, PhotonSource source) {
  if (!(duration_s >= 0.0)) throw ValidationError("duration", "must be >= 0");
  return gen_photons(rate, 0, to_ps(duration_s), source, rng);
}

OpticalTimeline gen_attack(const AttackScenario& scenario, TimePs duration, RandomStream& rng) {
  scenario.validate();
  OpticalTimeline tl;
  tl.duration = duration;

  const bool blinding = scenario.blind_power_level > 0.0;
  if (!blinding && !scenario.fakes_without_blinding) return tl;

  TimePs stop = duration;
  if (scenario.stop_blind_at) stop = std::clamp(to_ps(*scenario.stop_blind_at), TimePs{0}, duration);
  if (blinding && stop > 0) tl.cw_segments.push_back({0, stop, scenario.blind_power_level, CwSource::AttackBlind});

  // Fakes are only useful while the detector is held blind.
  const TimePs fake_end = blinding ? stop : duration;
  const TimePs width = to_ps(scenario.fake_width);
  for (const auto& arrival : gen_photons(scenario.fake_pulse_rate, 0, fake_end, PhotonSource::Signal, rng))
    tl.pulses.push_back({arrival.time, width, scenario.fake_peak_power, PulseSource::Fake,
                         std::numeric_limits<double>::infinity()});
  return tl;
}

OpticalTimeline gen_le_schedule(const SelfTestPlan& plan, const EmitterSettings& emitter,
                                const DetectorParams& detector, TimePs duration, RandomStream& rng) {
  emitter.validate();
  plan.validate(duration);

  OpticalTimeline tl;
  tl.duration = duration;
  switch (plan.strategy) {
  case Strategy::Salt:
    tl.photons = gen_photons(plan.salt_rate, plan.test_start, plan.test_start + plan.test_duration,
                             PhotonSource::Salt, rng);
    break;
  case Strategy::FlagPulse: {
    const Pulse pulse{plan.test_start, plan.test_duration, emitter.flag_peak_power, PulseSource::Flag,
                      emitter.flag_photons};
    if (pulse.energy() >= detector.fake_energy)
      throw ValidationError("emitter.flag_peak_power", "flag pulse energy reaches the fake-state threshold");
    tl.pulses.push_back(pulse);
    break;
  }
  case Strategy::SelfBlind: {
    if (emitter.self_blind_power < detector.blind_power)
      throw ValidationError("emitter.self_blind_power", "below the detector blinding power");
    if (plan.test_duration <= 0) break;
    const Pulse onset{plan.test_start, to_ps(emitter.onset_width), emitter.self_blind_power, PulseSource::Flag,
                      std::numeric_limits<double>::infinity()};
    if (onset.energy() >= detector.fake_energy)
      throw ValidationError("emitter.onset_width", "onset pulse energy reaches the fake-state threshold");
    tl.pulses.push_back(onset);
    tl.cw_segments.push_back(
        {plan.test_start, plan.test_start + plan.test_duration, emitter.self_blind_power, CwSource::LeBlind});
    break;
  }
  }
  return tl;
}

OpticalTimeline merge_timelines(std::span<const OpticalTimeline> fragments) {
  OpticalTimeline out;
  if (fragments.empty()) return out;
  out.duration = fragments.front().duration;
  for (const auto& f : fragments) {
    if (f.duration != out.duration) throw ValidationError("timeline.duration", "fragments disagree on the horizon");
    out.photons.insert(out.photons.end(), f.photons.begin(), f.photons.end());
    out.cw_segments.insert(out.cw_segments.end(), f.cw_segments.begin(), f.cw_segments.end());
    out.pulses.insert(out.pulses.end(), f.pulses.begin(), f.pulses.end());
  }
  std::sort(out.photons.begin(), out.photons.end(), [](const Photon& a, const Photon& b) {
    return std::tie(a.time, a.source) < std::tie(b.time, b.source);
  });
  std::sort(out.cw_segments.begin(), out.cw_segments.end(), [](const CwSegment& a, const CwSegment& b) {
    return std::tie(a.start, a.end, a.source, a.power) < std::tie(b.start, b.end, b.source, b.power);
  });
  std::sort(out.pulses.begin(), out.pulses.end(), [](const Pulse& a, const Pulse& b) {
    return std::tie(a.start, a.source, a.width, a.peak_power, a.photon_number) <
           std::tie(b.start, b.source, b.width, b.peak_power, b.photon_number);
  });
  return out;
}

OpticalTimeline merge_timelines(std::initializer_list<OpticalTimeline> fragments) {
  return merge_timelines(std::span<const OpticalTimeline>(fragments.begin(), fragments.size()));
}

} // namespace blindsim
