#pragma once

#include <string_view>
#include <vector>

#include "blindsim/time.hpp"

namespace blindsim {

enum class PhotonSource { Signal, Salt };
enum class CwSource { AttackBlind, LeBlind };
enum class PulseSource { Fake, Flag };

std::string_view to_string(PhotonSource s);
std::string_view to_string(CwSource s);
std::string_view to_string(PulseSource s);

/// A single photon reaching the detector.
struct Photon {
  TimePs time{0};
  PhotonSource source{PhotonSource::Signal};

  friend bool operator==(const Photon&, const Photon&) = default;
};

/// Constant CW power over [start, end). Overlapping segments add up.
struct CwSegment {
  TimePs start{0};
  TimePs end{0};
  double power{0.0}; ///< watts
  CwSource source{CwSource::AttackBlind};

  friend bool operator==(const CwSegment&, const CwSegment&) = default;
};

/// Short bright pulse. The detector treats it as arriving at `start`.
struct Pulse {
  TimePs start{0};
  TimePs width{1};
  double peak_power{0.0}; ///< watts
  PulseSource source{PulseSource::Fake};
  /// Photons absorbed from a sub-fake-threshold pulse; +inf means the pulse
  /// always fires an armed detector.
  double photon_number{1.0};

  /// Joules.
  [[nodiscard]] double energy() const { return peak_power * to_seconds(width); }

  friend bool operator==(const Pulse&, const Pulse&) = default;
};

/// Everything the detector sees during one trial, in [0, duration).
struct OpticalTimeline {
  TimePs duration{0};
  std::vector<Photon> photons;
  std::vector<CwSegment> cw_segments;
  std::vector<Pulse> pulses;

  /// Throws ValidationError on negative, out-of-horizon or unordered entries.
  void validate() const;

  /// Sum of all CW segments covering `t`.
  [[nodiscard]] double cw_power_at(TimePs t) const;

  friend bool operator==(const OpticalTimeline&, const OpticalTimeline&) = default;
};

} // namespace blindsim
