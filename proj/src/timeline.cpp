#include "blindsim/timeline.hpp"

#include <cmath>
#include <string>

#include "blindsim/error.hpp"

namespace blindsim {

std::string_view to_string(PhotonSource s) {
  return s == PhotonSource::Signal ? "SIGNAL" : "SALT";
}

std::string_view to_string(CwSource s) {
  return s == CwSource::AttackBlind ? "ATTACK_BLIND" : "LE_BLIND";
}

std::string_view to_string(PulseSource s) {
  return s == PulseSource::Fake ? "FAKE" : "FLAG";
}

namespace {

void check_time(TimePs t, TimePs duration, const std::string& field) {
  if (t < 0) throw ValidationError(field, "negative timestamp " + std::to_string(t) + " ps");
  if (t >= duration) throw ValidationError(field, "timestamp beyond horizon");
}

} // namespace

void OpticalTimeline::validate() const {
  if (duration < 0) throw ValidationError("timeline.duration", "must be >= 0");

  for (std::size_t i = 0; i < photons.size(); ++i) {
    check_time(photons[i].time, duration, "timeline.photons[" + std::to_string(i) + "]");
    if (i > 0 && photons[i].time < photons[i - 1].time)
      throw ValidationError("timeline.photons[" + std::to_string(i) + "]", "out of time order");
  }

  for (std::size_t i = 0; i < pulses.size(); ++i) {
    const auto field = "timeline.pulses[" + std::to_string(i) + "]";
    const auto& p = pulses[i];
    check_time(p.start, duration, field);
    if (i > 0 && p.start < pulses[i - 1].start) throw ValidationError(field, "out of time order");
    if (p.width <= 0) throw ValidationError(field, "width must be > 0");
    if (!(p.peak_power >= 0.0)) throw ValidationError(field, "peak power must be >= 0");
    if (!(p.photon_number >= 0.0)) throw ValidationError(field, "photon number must be >= 0");
  }

  for (std::size_t i = 0; i < cw_segments.size(); ++i) {
    const auto field = "timeline.cw_segments[" + std::to_string(i) + "]";
    const auto& s = cw_segments[i];
    check_time(s.start, duration, field);
    if (s.end < s.start || s.end > duration) throw ValidationError(field, "end outside [start, duration]");
    if (i > 0 && s.start < cw_segments[i - 1].start) throw ValidationError(field, "out of time order");
    if (!(s.power >= 0.0) || !std::isfinite(s.power)) throw ValidationError(field, "power must be finite and >= 0");
  }
}

double OpticalTimeline::cw_power_at(TimePs t) const {
  double total = 0.0;
  for (const auto& s : cw_segments)
    if (s.start <= t && t < s.end) total += s.power;
  return total;
}

} // namespace blindsim
