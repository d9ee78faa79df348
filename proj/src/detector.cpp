#include "blindsim/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include <boost/math/tools/roots.hpp>

#include "blindsim/error.hpp"

namespace blindsim {

std::string_view to_string(ClickCause c) {
  switch (c) {
  case ClickCause::Signal: return "SIGNAL";
  case ClickCause::Dark: return "DARK";
  case ClickCause::Afterpulse: return "AFTERPULSE";
  case ClickCause::Salt: return "SALT";
  case ClickCause::Flag: return "FLAG";
  case ClickCause::Fake: return "FAKE";
  case ClickCause::Recovery: return "RECOVERY";
  case ClickCause::Noise: return "NOISE";
  }
  return "?";
}

namespace {

void require_probability(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "must lie in [0, 1]");
}

void require_non_negative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be finite and >= 0");
}

} // namespace

void DetectorParams::validate() const {
  require_probability(efficiency, "detector.efficiency");
  require_probability(afterpulse_prob, "detector.afterpulse_prob");
  if (afterpulse_prob >= 1.0) throw ValidationError("detector.afterpulse_prob", "must be < 1");
  require_probability(recovery_click_prob, "detector.recovery_click_prob");
  require_non_negative(dark_rate, "detector.dark_rate");
  require_non_negative(noise_rate, "detector.noise_rate");
  require_non_negative(afterpulse_tau, "detector.afterpulse_tau");
  require_non_negative(max_rate_ref, "detector.max_rate_ref");
  require_non_negative(dead_time, "detector.dead_time");
  if (to_ps(dead_time) <= 0) throw ValidationError("detector.dead_time", "must be > 0 (at least 1 ps)");
  require_non_negative(blind_power, "detector.blind_power");
  if (blind_power <= 0.0) throw ValidationError("detector.blind_power", "must be > 0");
  require_non_negative(fake_energy, "detector.fake_energy");
  if (fake_energy <= 0.0) throw ValidationError("detector.fake_energy", "must be > 0");
}

// ---------------------------------------------------------------------------

namespace {

// Same-time ordering: a falling CW edge is seen before anything else at that
// instant and a rising edge after everything else. This lets the onset flag
// of a self-blinding interval hit the detector before the blinding does.
enum class EventKind : int {
  CwDown = 0,
  Pulse = 1,
  Photon = 2,
  Afterpulse = 3,
  Dark = 4,
  Noise = 5,
  CwUp = 6,
};

struct StaticEvent {
  TimePs time;
  EventKind kind;
  std::size_t index;
};

/// Poisson process of candidate times, drawn lazily.
class PoissonClock {
public:
  PoissonClock(double rate, TimePs horizon, RandomStream rng)
      : mean_gap_{rate > 0.0 ? 1.0 / rate : 0.0}, horizon_{horizon}, rng_{rng} {
    advance();
  }

  [[nodiscard]] TimePs next() const { return next_; }

  void advance() {
    if (mean_gap_ <= 0.0) {
      next_ = kNever;
      return;
    }
    seconds_ += rng_.exponential(mean_gap_);
    const double ps = seconds_ * static_cast<double>(kPsPerSecond);
    next_ = ps >= static_cast<double>(horizon_) ? kNever : static_cast<TimePs>(ps);
  }

private:
  double mean_gap_;
  TimePs horizon_;
  RandomStream rng_;
  double seconds_{0.0};
  TimePs next_{kNever};
};

class Run {
public:
  Run(const DetectorParams& p, const OpticalTimeline& tl, const RandomStream& rng)
      : p_{p},
        tl_{tl},
        dead_ps_{to_ps(p.dead_time)},
        photon_rng_{rng.split("photon")},
        pulse_rng_{rng.split("pulse")},
        afterpulse_rng_{rng.split("afterpulse")},
        recovery_rng_{rng.split("recovery")},
        dark_{p.dark_rate, tl.duration, rng.split("dark")},
        noise_{p.noise_rate, tl.duration, rng.split("noise")},
        active_(tl.cw_segments.size(), 0) {}

  std::vector<ClickRecord> execute(DetectorState& state) {
    build_static_events();
    std::size_t next_static = 0;

    for (;;) {
      // Pick the earliest of: next static event, pending afterpulse, dark, noise.
      TimePs best_time = kNever;
      EventKind best_kind = EventKind::CwUp;
      auto consider = [&](TimePs t, EventKind k) {
        if (t == kNever) return;
        if (std::tie(t, k) < std::tie(best_time, best_kind)) {
          best_time = t;
          best_kind = k;
        }
      };
      if (next_static < events_.size()) consider(events_[next_static].time, events_[next_static].kind);
      if (pending_afterpulse_) consider(*pending_afterpulse_, EventKind::Afterpulse);
      consider(dark_.next(), EventKind::Dark);
      consider(noise_.next(), EventKind::Noise);

      if (best_time == kNever || best_time >= tl_.duration) break;

      switch (best_kind) {
      case EventKind::CwDown:
      case EventKind::CwUp:
      case EventKind::Pulse:
      case EventKind::Photon:
        handle_static(events_[next_static++]);
        break;
      case EventKind::Afterpulse:
        pending_afterpulse_.reset();
        if (armed(best_time)) click(best_time, ClickCause::Afterpulse);
        break;
      case EventKind::Dark:
        dark_.advance();
        if (armed(best_time)) click(best_time, ClickCause::Dark);
        break;
      case EventKind::Noise:
        noise_.advance();
        if (!dead(best_time)) click(best_time, ClickCause::Noise);
        break;
      }
    }

    state.incident_cw_power = power_;
    state.dead_until = dead_until_;
    state.pending_afterpulse = pending_afterpulse_;
    if (blinded_) state.mode = DetectorMode::Blinded;
    else if (dead(tl_.duration)) state.mode = DetectorMode::Dead;
    else state.mode = DetectorMode::Armed;
    return std::move(clicks_);
  }

private:
  void build_static_events() {
    events_.reserve(tl_.photons.size() + tl_.pulses.size() + 2 * tl_.cw_segments.size());
    for (std::size_t i = 0; i < tl_.photons.size(); ++i)
      events_.push_back({tl_.photons[i].time, EventKind::Photon, i});
    for (std::size_t i = 0; i < tl_.pulses.size(); ++i)
      events_.push_back({tl_.pulses[i].start, EventKind::Pulse, i});
    for (std::size_t i = 0; i < tl_.cw_segments.size(); ++i) {
      const auto& s = tl_.cw_segments[i];
      if (s.end <= s.start) continue;
      events_.push_back({s.start, EventKind::CwUp, i});
      if (s.end < tl_.duration) events_.push_back({s.end, EventKind::CwDown, i});
    }
    std::stable_sort(events_.begin(), events_.end(), [](const StaticEvent& a, const StaticEvent& b) {
      return std::tie(a.time, a.kind) < std::tie(b.time, b.kind);
    });
  }

  void handle_static(const StaticEvent& ev) {
    switch (ev.kind) {
    case EventKind::Photon: {
      const auto& ph = tl_.photons[ev.index];
      // Draw for every photon so identical photon streams stay coupled
      // across parameter changes.
      const double u = photon_rng_.uniform();
      if (armed(ev.time) && u < p_.efficiency)
        click(ev.time, ph.source == PhotonSource::Signal ? ClickCause::Signal : ClickCause::Salt);
      break;
    }
    case EventKind::Pulse: {
      const auto& pulse = tl_.pulses[ev.index];
      const auto cause = pulse.source == PulseSource::Fake ? ClickCause::Fake : ClickCause::Flag;
      const double u = pulse_rng_.uniform();
      if (pulse.energy() >= p_.fake_energy) {
        if (!dead(ev.time)) click(ev.time, cause);
      } else if (armed(ev.time)) {
        const double miss = std::pow(1.0 - p_.efficiency, pulse.photon_number);
        if (u < 1.0 - miss) click(ev.time, cause);
      }
      break;
    }
    case EventKind::CwUp:
    case EventKind::CwDown: {
      active_[ev.index] = ev.kind == EventKind::CwUp ? 1 : 0;
      const bool was_blinded = blinded_;
      power_ = 0.0;
      for (std::size_t i = 0; i < active_.size(); ++i)
        if (active_[i]) power_ += tl_.cw_segments[i].power;
      blinded_ = power_ >= p_.blind_power;
      if (was_blinded && !blinded_) {
        const bool fires = recovery_rng_.bernoulli(p_.recovery_click_prob);
        if (fires && !dead(ev.time)) click(ev.time, ClickCause::Recovery);
      }
      break;
    }
    default:
      break;
    }
  }

  [[nodiscard]] bool dead(TimePs t) const { return t < dead_until_; }
  [[nodiscard]] bool armed(TimePs t) const { return !blinded_ && !dead(t); }

  void click(TimePs t, ClickCause cause) {
    clicks_.push_back({t, cause});
    dead_until_ = t + dead_ps_;
    pending_afterpulse_.reset();

    const bool can_spawn = !blinded_ && cause != ClickCause::Noise &&
                           (cause != ClickCause::Afterpulse || p_.afterpulse_cascade);
    if (can_spawn && afterpulse_rng_.bernoulli(p_.afterpulse_prob))
      pending_afterpulse_ = dead_until_ + to_ps(afterpulse_rng_.exponential(p_.afterpulse_tau));
  }

  const DetectorParams& p_;
  const OpticalTimeline& tl_;
  TimePs dead_ps_;
  RandomStream photon_rng_;
  RandomStream pulse_rng_;
  RandomStream afterpulse_rng_;
  RandomStream recovery_rng_;
  PoissonClock dark_;
  PoissonClock noise_;

  std::vector<StaticEvent> events_;
  std::vector<char> active_;
  std::vector<ClickRecord> clicks_;
  double power_{0.0};
  bool blinded_{false};
  TimePs dead_until_{0};
  std::optional<TimePs> pending_afterpulse_;
};

} // namespace

Detector::Detector(DetectorParams params) : params_{params} { params_.validate(); }

std::vector<ClickRecord> Detector::run(const OpticalTimeline& timeline, const RandomStream& rng) {
  timeline.validate();
  state_ = DetectorState{};
  Run run{params_, timeline, rng};
  return run.execute(state_);
}

std::vector<ClickRecord> process_timeline(const DetectorParams& params, const OpticalTimeline& timeline,
                                          const RandomStream& rng) {
  Detector det{params};
  return det.run(timeline, rng);
}

// ---------------------------------------------------------------------------
// Renewal analysis
//
// After every click the detector is dead for d, then waits for whichever
// comes first: a primary event (rate L) or, with spawn probability s, its
// pending afterpulse (rate mu = 1/tau). The cycle after a click of spawn
// probability s has mean  d + s/(L+mu) + (1-s)/L  and ends in an afterpulse
// with probability  s*mu/(L+mu). Primary and afterpulse clicks differ only in
// s when cascading is off, giving a two-state embedded chain.
// ---------------------------------------------------------------------------

SteadyState predict_steady_state(const DetectorParams& params, double primary_rate) {
  if (!(primary_rate >= 0.0)) throw ValidationError("primary_rate", "must be >= 0");
  SteadyState out;
  if (primary_rate == 0.0) return out;

  const double d = params.dead_time;
  const double lam = primary_rate;
  const double s_primary = params.afterpulse_prob;
  const double s_after = params.afterpulse_cascade ? params.afterpulse_prob : 0.0;

  auto cycle = [&](double s) {
    if (s == 0.0 || params.afterpulse_tau <= 0.0) return d + 1.0 / lam;
    const double mu = 1.0 / params.afterpulse_tau;
    return d + s / (lam + mu) + (1.0 - s) / lam;
  };
  auto to_afterpulse = [&](double s) {
    if (s == 0.0) return 0.0;
    if (params.afterpulse_tau <= 0.0) return s;
    const double mu = 1.0 / params.afterpulse_tau;
    return s * mu / (lam + mu);
  };

  const double q_p = to_afterpulse(s_primary);
  const double q_a = to_afterpulse(s_after);
  const double pi_a = q_p / (1.0 - q_a + q_p);

  out.mean_cycle = (1.0 - pi_a) * cycle(s_primary) + pi_a * cycle(s_after);
  out.click_rate = 1.0 / out.mean_cycle;
  out.armed_fraction = 1.0 - d / out.mean_cycle;
  out.afterpulse_fraction = pi_a;
  return out;
}

double solve_primary_rate(const DetectorParams& params, double click_rate) {
  if (!(click_rate >= 0.0)) throw ValidationError("click_rate", "must be >= 0");
  if (click_rate == 0.0) return 0.0;
  if (click_rate * params.dead_time >= 1.0)
    throw ValidationError("click_rate", "at or above saturation 1/dead_time");

  // Click rate is increasing in the primary rate; bracket in log space.
  auto excess = [&](double log_lam) {
    return predict_steady_state(params, std::exp(log_lam)).click_rate - click_rate;
  };
  double lo = std::log(click_rate) - 40.0;
  double hi = std::log(click_rate);
  while (excess(hi) < 0.0) {
    hi += 2.0;
    if (hi > 200.0) throw ValidationError("click_rate", "not reachable with these parameters");
  }
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(excess, lo, hi, tol, iters);
  return std::exp(0.5 * (a + b));
}

double calibrate_dead_time(const DetectorParams& params, double target_armed_fraction, double click_rate) {
  if (!(target_armed_fraction > 0.0 && target_armed_fraction < 1.0))
    throw ValidationError("target_armed_fraction", "must lie in (0, 1)");
  if (!(click_rate >= 0.0)) throw ValidationError("click_rate", "must be >= 0");

  constexpr double kSmallest = 1e-12; // one tick
  if (click_rate == 0.0) return kSmallest;

  // For a candidate dead time, find the primary rate that produces
  // `click_rate` and evaluate the armed fraction of the resulting cycle.
  // Armed fraction falls monotonically with dead time.
  auto armed_at = [&](double dead_time) {
    DetectorParams trial = params;
    trial.dead_time = dead_time;
    const double lam = solve_primary_rate(trial, click_rate);
    return predict_steady_state(trial, lam).armed_fraction;
  };

  const double upper = 1.0 / click_rate;
  double lo = 0.0;
  double hi = upper * (1.0 - 1e-9);
  if (armed_at(hi) > target_armed_fraction)
    throw ValidationError("target_armed_fraction", "infeasible at this click rate");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * upper; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= 0.0) break;
    if (armed_at(mid) > target_armed_fraction) lo = mid;
    else hi = mid;
  }
  return std::max(0.5 * (lo + hi), kSmallest);
}

} // namespace blindsim
