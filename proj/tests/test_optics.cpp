#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "blindsim/error.hpp"
#include "blindsim/optics.hpp"

using namespace blindsim;

namespace {

struct Moments {
  double mean;
  double variance;
};

Moments photon_count_moments(double rate, double duration, int trials) {
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < trials; ++i) {
    auto rng = trial_stream(5, std::uint64_t(i), "signal");
    const auto n = static_cast<double>(gen_signal_photons(rate, duration, rng).size());
    sum += n;
    sq += n * n;
  }
  const double mean = sum / trials;
  return {mean, (sq - trials * mean * mean) / (trials - 1)};
}

DetectorParams reference_like() {
  DetectorParams d;
  d.blind_power = 500e-12;
  d.fake_energy = 1e-15;
  return d;
}

} // namespace

TEST_CASE("signal photons are Poisson distributed") {
  SUBCASE("5e4/s over 200 us: mean and variance 10") {
    const int n = 10000;
    const auto m = photon_count_moments(5e4, 200e-6, n);
    CHECK(std::fabs(m.mean - 10.0) < 3.0 * std::sqrt(10.0 / n));
    // Var of the sample variance of Poisson(10): (mu + 2 mu^2) / n.
    CHECK(std::fabs(m.variance - 10.0) < 3.0 * std::sqrt((10.0 + 200.0) / n));
  }
  SUBCASE("1e6/s over 1 ms: mean within 3 sigma of 1000") {
    const int n = 10000;
    const auto m = photon_count_moments(1e6, 1e-3, n);
    CHECK(std::fabs(m.mean - 1000.0) < 3.0 * std::sqrt(1000.0 / n));
  }
  SUBCASE("rate 0 gives nothing") {
    RandomStream rng{1};
    CHECK(gen_signal_photons(0.0, 1.0, rng).empty());
  }
  SUBCASE("negative rate is rejected") {
    RandomStream rng{1};
    CHECK_THROWS_AS(gen_signal_photons(-1.0, 1.0, rng), ValidationError);
  }
}

TEST_CASE("inter-arrival gaps pass a KS exponentiality test at alpha 0.01") {
  const double rate = 1e6;
  RandomStream rng{2024};
  const auto photons = gen_signal_photons(rate, 0.102, rng);
  REQUIRE(photons.size() > 100001);
  std::vector<double> gaps;
  for (std::size_t i = 1; i <= 100000; ++i) gaps.push_back(to_seconds(photons[i].time - photons[i - 1].time));
  std::sort(gaps.begin(), gaps.end());

  const double n = static_cast<double>(gaps.size());
  double d = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * gaps[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  // Asymptotic Kolmogorov critical value at 1%.
  CHECK(d < 1.6276 / std::sqrt(n));
}

TEST_CASE("photons are sorted and inside the horizon") {
  RandomStream rng{3};
  const auto photons = gen_photons(1e7, 1000, 5'000'000, PhotonSource::Salt, rng);
  REQUIRE(!photons.empty());
  CHECK(std::is_sorted(photons.begin(), photons.end(), [](auto& a, auto& b) { return a.time < b.time; }));
  CHECK(photons.front().time >= 1000);
  CHECK(photons.back().time < 5'000'000);
  CHECK(std::all_of(photons.begin(), photons.end(), [](auto& p) { return p.source == PhotonSource::Salt; }));
}

TEST_CASE("attack generator") {
  AttackScenario a;
  a.blind_power_level = 500e-12;
  a.fake_pulse_rate = 5e4;
  a.fake_peak_power = 3e-6;
  a.fake_width = 2e-9;
  const TimePs horizon = to_ps(200e-6);

  SUBCASE("blind segment and about 10 fake pulses of 6 fJ") {
    double pulses = 0.0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      auto rng = trial_stream(8, std::uint64_t(i), "attack");
      const auto tl = gen_attack(a, horizon, rng);
      REQUIRE(tl.cw_segments.size() == 1);
      CHECK(tl.cw_segments[0].start == 0);
      CHECK(tl.cw_segments[0].end == horizon);
      CHECK(tl.cw_segments[0].power == 500e-12);
      for (const auto& p : tl.pulses) {
        CHECK(p.energy() == 3e-6 * to_seconds(to_ps(2e-9)));
        CHECK(p.source == PulseSource::Fake);
      }
      pulses += static_cast<double>(tl.pulses.size());
    }
    CHECK(std::fabs(pulses / n - 10.0) < 3.0 * std::sqrt(10.0 / n));
    CHECK(Pulse{0, to_ps(2e-9), 3e-6, PulseSource::Fake, 1}.energy() == doctest::Approx(6e-15).epsilon(1e-12));
  }

  SUBCASE("no blinding and no explicit flag gives an empty fragment") {
    a.blind_power_level = 0.0;
    RandomStream rng{1};
    const auto tl = gen_attack(a, horizon, rng);
    CHECK(tl.cw_segments.empty());
    CHECK(tl.pulses.empty());
    CHECK(tl.photons.empty());

    a.fakes_without_blinding = true;
    RandomStream rng2{1};
    CHECK(!gen_attack(a, horizon, rng2).pulses.empty());
  }

  SUBCASE("stop_blind_at produces exactly one downward crossing") {
    a.stop_blind_at = to_seconds(horizon) / 2;
    RandomStream rng{5};
    const auto tl = gen_attack(a, horizon, rng);
    REQUIRE(tl.cw_segments.size() == 1);
    CHECK(tl.cw_segments[0].end == horizon / 2);
    int crossings = 0;
    bool above = tl.cw_power_at(0) >= 500e-12;
    for (TimePs t = 0; t < horizon; t += 1000) {
      const bool now = tl.cw_power_at(t) >= 500e-12;
      if (above && !now) ++crossings;
      above = now;
    }
    CHECK(crossings == 1);
    for (const auto& p : tl.pulses) CHECK(p.start < horizon / 2);
  }
}

TEST_CASE("local emitter schedules") {
  const auto det = reference_like();
  const EmitterSettings em;
  const TimePs horizon = to_ps(1e-3);

  SUBCASE("salt photons only inside the test interval") {
    SelfTestPlan plan;
    plan.strategy = Strategy::Salt;
    plan.test_start = to_ps(300e-6);
    plan.test_duration = to_ps(200e-6);
    plan.salt_rate = 4.5e5;
    double total = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      auto rng = trial_stream(3, std::uint64_t(i), "emitter");
      const auto tl = gen_le_schedule(plan, em, det, horizon, rng);
      for (const auto& p : tl.photons) {
        CHECK(p.source == PhotonSource::Salt);
        CHECK(p.time >= plan.test_start);
        CHECK(p.time < plan.test_start + plan.test_duration);
      }
      total += static_cast<double>(tl.photons.size());
    }
    CHECK(std::fabs(total / n - 90.0) < 3.0 * std::sqrt(90.0 / n));
  }

  SUBCASE("flag pulse of 25 ns below the fake threshold") {
    SelfTestPlan plan;
    plan.strategy = Strategy::FlagPulse;
    plan.test_start = to_ps(500e-6);
    plan.test_duration = to_ps(25e-9);
    RandomStream rng{1};
    const auto tl = gen_le_schedule(plan, em, det, horizon, rng);
    REQUIRE(tl.pulses.size() == 1);
    CHECK(tl.pulses[0].width == 25'000);
    CHECK(tl.pulses[0].start == plan.test_start);
    CHECK(tl.pulses[0].source == PulseSource::Flag);
    CHECK(tl.pulses[0].photon_number == em.flag_photons);
    CHECK(tl.pulses[0].energy() < det.fake_energy);

    EmitterSettings hot = em;
    hot.flag_peak_power = 1e-6;
    RandomStream rng2{1};
    CHECK_THROWS_AS(gen_le_schedule(plan, hot, det, horizon, rng2), ValidationError);
  }

  SUBCASE("self-blind: CW segment plus onset flag marker") {
    SelfTestPlan plan;
    plan.strategy = Strategy::SelfBlind;
    plan.test_start = to_ps(400e-6);
    plan.test_duration = to_ps(200e-6);
    RandomStream rng{1};
    const auto tl = gen_le_schedule(plan, em, det, horizon, rng);
    REQUIRE(tl.cw_segments.size() == 1);
    CHECK(tl.cw_segments[0].start == plan.test_start);
    CHECK(tl.cw_segments[0].end == plan.test_start + plan.test_duration);
    CHECK(tl.cw_segments[0].power >= det.blind_power);
    CHECK(tl.cw_segments[0].source == CwSource::LeBlind);
    REQUIRE(tl.pulses.size() == 1);
    CHECK(tl.pulses[0].start == plan.test_start);
    CHECK(tl.pulses[0].source == PulseSource::Flag);
    CHECK(std::isinf(tl.pulses[0].photon_number));

    EmitterSettings dim = em;
    dim.self_blind_power = 100e-12;
    RandomStream rng2{1};
    CHECK_THROWS_AS(gen_le_schedule(plan, dim, det, horizon, rng2), ValidationError);
  }

  SUBCASE("plans outside the horizon are rejected") {
    SelfTestPlan plan;
    plan.test_start = horizon - 10;
    RandomStream rng{1};
    CHECK_THROWS_AS(gen_le_schedule(plan, em, det, horizon, rng), ValidationError);
  }
}

TEST_CASE("merging timelines") {
  const TimePs horizon = to_ps(1e-3);
  RandomStream r1{1};
  RandomStream r2{2};
  OpticalTimeline a{horizon, gen_photons(1e5, 0, horizon, PhotonSource::Signal, r1),
                    {{0, horizon, 500e-12, CwSource::AttackBlind}},
                    {{to_ps(1e-4), to_ps(2e-9), 3e-6, PulseSource::Fake, INFINITY}}};
  OpticalTimeline b{horizon, gen_photons(1e5, 0, horizon, PhotonSource::Salt, r2),
                    {{to_ps(2e-4), to_ps(4e-4), 2e-9, CwSource::LeBlind}},
                    {{to_ps(2e-4), to_ps(1e-9), 2e-9, PulseSource::Flag, INFINITY}}};
  const OpticalTimeline empty{horizon, {}, {}, {}};

  CHECK(merge_timelines({empty, a}) == merge_timelines({a}));
  CHECK(merge_timelines({a}) == a); // already canonical
  CHECK(merge_timelines({a, b}) == merge_timelines({b, a}));
  CHECK(merge_timelines({a, merge_timelines({b, empty})}) == merge_timelines({merge_timelines({a, b}), empty}));

  const auto m = merge_timelines({a, b});
  CHECK(m.photons.size() == a.photons.size() + b.photons.size());
  CHECK(m.cw_segments.size() == 2);
  CHECK(m.cw_power_at(to_ps(3e-4)) == doctest::Approx(500e-12 + 2e-9));
  CHECK(m.cw_power_at(to_ps(5e-4)) == doctest::Approx(500e-12));
  CHECK_NOTHROW(m.validate());

  OpticalTimeline other{horizon / 2, {}, {}, {}};
  CHECK_THROWS_AS(merge_timelines({a, other}), ValidationError);
}
