// Acceptance checks at the reference operating point. Prints one
// PASS/FAIL line per criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "blindsim/engine.hpp"
#include "blindsim/harness.hpp"
#include "blindsim/optics.hpp"

using namespace blindsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& measured) {
  std::printf("%s criterion %d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), measured.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d, e);
  return buf;
}

ExperimentResult run(Scenario s, Strategy st, std::int64_t trials, unsigned threads = 1) {
  auto c = reference_config(s, st);
  c.trials = trials;
  return run_experiment(c, threads);
}

double frac(std::int64_t k, std::int64_t n) { return n ? double(k) / double(n) : 0.0; }

std::int64_t count_tests(const ExperimentResult& r, bool (*pred)(const TestOutcome&)) {
  std::int64_t n = 0;
  for (const auto& t : r.trials)
    for (const auto& o : t.tests) n += pred(o) ? 1 : 0;
  return n;
}

// 1 ---------------------------------------------------------------------------
void normal_count_distribution() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(Scenario::Normal, Strategy::Salt, 10000, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& h = r.summary.baseline_counts;
  const bool ok = h.total() >= 10000 && std::fabs(h.mean() - 10.0) <= 1.0 && h.variance() > h.mean() && secs < 30.0;
  report(1, ok, "normal count distribution in 200 us: mean 10 +/- 1, variance > mean, >= 1e4 trials, < 30 s",
         fmt("trials=%.0f mean=%.4f variance=%.4f runtime=%.2fs", double(h.total()), h.mean(), h.variance(), secs));
}

// 2 ---------------------------------------------------------------------------
void salt_separation() {
  const auto n = run(Scenario::Normal, Strategy::Salt, 7432);
  const auto m = run(Scenario::Manipulated, Strategy::Salt, 7686);
  const auto& hn = n.summary.test_counts;
  const auto& hm = m.summary.test_counts;
  const double normal_above = frac(std::int64_t(hn.count_at_least(51)), std::int64_t(hn.total()));
  const double manip_below = frac(std::int64_t(hm.count_at_most(49)), std::int64_t(hm.total()));
  const double p1 = hn.quantile(0.01);
  const double p99 = hm.quantile(0.99);
  const bool ok = hn.total() == 7432 && hm.total() == 7686 && normal_above >= 0.999 && manip_below >= 0.999 &&
                  p1 > 60 && p99 < 40;
  report(2, ok, "salt test: >= 99.9% normal > 50, >= 99.9% manipulated < 50, normal P1 > 60, manipulated P99 < 40",
         fmt("normal>50=%.5f manipulated<50=%.5f normal[min=%.0f P1=%.0f] manipulated[P99=%.0f", normal_above,
             manip_below, hn.min_value(), p1, p99) +
             fmt(" max=%.0f]", hm.max_value()));
}

// 3 ---------------------------------------------------------------------------
void flag_pulses() {
  const auto det = reference_detector();
  const bool calibrated = det.dead_time == calibrate_dead_time(det, kOnsetResponseProb, kReferenceClickRate);
  const auto n = run(Scenario::Normal, Strategy::FlagPulse, 12542);
  const auto m = run(Scenario::Manipulated, Strategy::FlagPulse, 12380);
  const double pn = frac(n.summary.flags_seen, n.summary.tests);
  const double pm = frac(m.summary.flags_seen, m.summary.tests);
  const double fake_rate = reference_config(Scenario::Manipulated, Strategy::FlagPulse).attack.fake_pulse_rate;
  const bool ok = calibrated && n.summary.tests == 12542 && m.summary.tests == 12380 &&
                  std::fabs(pn - 0.934) <= 0.015 && pm <= 0.01 && fake_rate == 5e4;
  report(3, ok, "flag pulse response within 60 ns: normal 0.934 +/- 0.015 (12542), manipulated <= 0.01 (12380)",
         fmt("normal=%.5f (%.0f/12542) manipulated=%.5f (%.0f/12380) dead_time=%.4g s", pn,
             double(n.summary.flags_seen), pm, double(m.summary.flags_seen), det.dead_time));
}

// 4 ---------------------------------------------------------------------------
void self_blind() {
  const auto n = run(Scenario::Normal, Strategy::SelfBlind, 7608);
  const auto m = run(Scenario::Manipulated, Strategy::SelfBlind, 7658);
  const double onset_n = frac(n.summary.flags_seen, n.summary.tests);
  const double onset_m = frac(m.summary.flags_seen, m.summary.tests);
  std::int64_t in_blind_total = 0;
  for (const auto& t : n.trials)
    for (const auto& o : t.tests) in_blind_total += o.verdict.in_blind_clicks;
  const auto m_with = count_tests(m, [](const TestOutcome& o) { return o.verdict.in_blind_clicks >= 1; });
  const double in_blind_n = frac(in_blind_total, n.summary.tests);
  const double with_m = frac(m_with, m.summary.tests);
  const bool ok = n.summary.tests == 7608 && m.summary.tests == 7658 && std::fabs(onset_n - 0.976) <= 0.01 &&
                  in_blind_n <= 0.005 && with_m >= 0.999 && onset_m <= 0.01;
  report(4, ok,
         "self-blind: normal onset 0.976 +/- 0.01, normal in-blind clicks <= 0.5% of runs, manipulated >= 1 in-blind "
         "click in >= 99.9% and onset <= 0.01",
         fmt("normal onset=%.5f in-blind clicks/runs=%.5f | manipulated in-blind>=1=%.5f onset=%.5f", onset_n,
             in_blind_n, with_m, onset_m));
}

// 5 ---------------------------------------------------------------------------
void recovery_attack() {
  auto c = reference_config(Scenario::RecoveryAttack, Strategy::SelfBlind);
  c.trials = 1000;
  bool ok = c.detector.recovery_click_prob == 1.0;
  std::int64_t negative = 0;
  std::int64_t inside = 0;
  const auto r = run_experiment(c);
  for (const auto& t : r.trials)
    for (const auto& o : t.tests) {
      const auto d = o.verdict.decision;
      negative += (d == Decision::NegativeManipulation || d == Decision::Both) ? 1 : 0;
      const TimePs stop = o.plan.test_start + std::llround(c.recovery_stop_fraction * double(o.plan.test_duration));
      inside += (stop > o.plan.test_start && stop < o.plan.test_start + o.plan.test_duration) ? 1 : 0;
    }

  // Without electrical noise the interval must be completely silent.
  c.detector.noise_rate = 0.0;
  std::int64_t silent = 0;
  std::int64_t neg_exact = 0;
  for (const auto& t : run_experiment(c).trials)
    for (const auto& o : t.tests) {
      silent += (o.verdict.observed_count == 0 && o.response_offsets.empty()) ? 1 : 0;
      neg_exact += o.verdict.decision == Decision::NegativeManipulation ? 1 : 0;
    }
  ok = ok && negative == 1000 && inside == 1000 && silent == 1000 && neg_exact == 1000;
  report(5, ok,
         "recovery attack: blind stops inside self-blind interval, no RECOVERY click, verdict NEGATIVE or BOTH in "
         "all 1000 trials",
         fmt("NEGATIVE|BOTH=%.0f/1000 stop-inside=%.0f/1000 noise-free: silent=%.0f/1000 NEGATIVE=%.0f/1000",
             double(negative), double(inside), double(silent), double(neg_exact)));
}

// 6 ---------------------------------------------------------------------------
void error_mathematics() {
  using Big = boost::multiprecision::cpp_dec_float_50;
  auto pmf = [](const Big& mu, int i) {
    Big t = exp(-mu);
    for (int j = 1; j <= i; ++j) t *= mu / j;
    return t;
  };
  Big upper10 = 0;
  for (int i = 50; i < 400; ++i) upper10 += pmf(Big(10), i);
  Big lower100 = 0;
  for (int i = 0; i <= 49; ++i) lower100 += pmf(Big(100), i);
  const double fa_ref = static_cast<double>(upper10);
  const double miss_ref = static_cast<double>(lower100);

  const auto r = decision_error_rates(Strategy::Salt, PoissonModel{10}, PoissonModel{100}, 50);
  const double e_fa = std::fabs(r.false_alarm - fa_ref) / fa_ref;
  const double e_miss = std::fabs(r.miss - miss_ref) / miss_ref;
  const bool ok = r.false_alarm < 1e-15 && r.miss < 1e-7 && e_fa < 1e-10 && e_miss < 1e-10;
  report(6, ok, "Poisson(10) vs Poisson(100) at 50: false_alarm < 1e-15, miss < 1e-7, 50-digit oracle to 1e-10",
         fmt("false_alarm=%.6e (rel err %.1e) miss=%.6e (rel err %.1e)", r.false_alarm, e_fa, r.miss, e_miss));
}

// 7 ---------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const auto root = fs::temp_directory_path() / ("blindsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream sink;
  bool ok = true;
  int compared = 0;
  const std::pair<const char*, const char*> runs[] = {
      {"normal", "salt"}, {"manipulated", "flag"}, {"recovery", "selfblind"}};
  for (const auto& [scenario, protocol] : runs) {
    const auto a = root / (std::string(scenario) + "_" + protocol) / "a";
    RunOptions o;
    o.scenario = scenario;
    o.protocol = protocol;
    o.trials = 500;
    o.threads = 1;
    o.out = a;
    ok = ok && cmd_simulate(o, sink, sink) == kExitOk;
    for (unsigned threads : {2u, 4u}) {
      RunOptions re;
      re.config_path = a / "manifest.json";
      re.threads = threads;
      re.out = a.parent_path() / ("t" + std::to_string(threads));
      ok = ok && cmd_simulate(re, sink, sink) == kExitOk;
      const auto m = read_manifest(a / "manifest.json");
      for (const auto& [file, digest] : m.digests) {
        ok = ok && slurp(a / file) == slurp(re.out / file) && sha256_hex(re.out / file) == digest;
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  report(7, ok && compared > 0, "reruns from manifest are byte-identical under --threads 1, 2, 4",
         fmt("%.0f file comparisons across 3 experiments", double(compared)));
}

// 8 ---------------------------------------------------------------------------
void property_suites() {
  // Dead-time exclusion.
  DetectorParams p = reference_detector();
  p.noise_rate = 1e3;
  const TimePs dead = to_ps(p.dead_time);
  std::int64_t clicks = 0;
  std::int64_t violations = 0;
  for (std::uint64_t i = 0; clicks < 1'000'000; ++i) {
    auto src = trial_stream(8, i, "photons");
    OpticalTimeline tl{to_ps(0.05), gen_photons(4e6, 0, to_ps(0.05), PhotonSource::Signal, src), {}, {}};
    const auto out = process_timeline(p, tl, trial_stream(8, i, "detector"));
    for (std::size_t k = 1; k < out.size(); ++k) violations += out[k].time - out[k - 1].time < dead;
    clicks += std::int64_t(out.size());
  }

  // Blinding suppression.
  DetectorParams q = reference_detector();
  q.noise_rate = 0.0;
  std::int64_t blinded_clicks = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto src = trial_stream(9, s, "photons");
    OpticalTimeline tl{to_ps(1e-3), gen_photons(1e7, 0, to_ps(1e-3), PhotonSource::Signal, src),
                       {{0, to_ps(1e-3), q.blind_power, CwSource::AttackBlind}}, {}};
    blinded_clicks += std::int64_t(process_timeline(q, tl, trial_stream(9, s, "detector")).size());
  }

  // KS exponentiality of inter-arrival gaps.
  const double rate = 5e4;
  RandomStream rng{2021};
  const auto ph = gen_signal_photons(rate, 2.2, rng);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < ph.size() && gaps.size() < 100000; ++i)
    gaps.push_back(to_seconds(ph[i].time - ph[i - 1].time));
  std::sort(gaps.begin(), gaps.end());
  const double n = double(gaps.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double f = 1.0 - std::exp(-rate * gaps[i]);
    ks = std::max({ks, (double(i) + 1.0) / n - f, f - double(i) / n});
  }
  const double ks_crit = 1.6276 / std::sqrt(n);

  // Hidden-label shuffling: permute the cause labels of real click lists.
  std::int64_t changed = 0;
  std::int64_t verdicts = 0;
  std::mt19937_64 g{3};
  for (auto scenario : {Scenario::Normal, Scenario::Manipulated})
    for (auto strategy : {Strategy::Salt, Strategy::FlagPulse, Strategy::SelfBlind}) {
      auto c = reference_config(scenario, strategy);
      c.salt_null_trials = 500;
      const auto ctx = prepare(c);
      const TimePs horizon = to_ps(c.trial_duration);
      for (std::uint64_t i = 0; i < 100; ++i) {
        auto sched = trial_stream(c.seed, i, "schedule");
        const auto plans = schedule_test_count(c.plan, 3, to_ps(c.warmup), horizon, sched);
        auto sig = trial_stream(c.seed, i, "signal");
        std::vector<OpticalTimeline> parts{
            {horizon, gen_photons(c.signal_rate, 0, horizon, PhotonSource::Signal, sig), {}, {}}};
        if (scenario == Scenario::Manipulated) {
          auto atk = trial_stream(c.seed, i, "attack");
          parts.push_back(gen_attack(c.attack, horizon, atk));
        }
        for (const auto& plan : plans) {
          auto em = trial_stream(c.seed, i, "emitter").split(std::uint64_t(plan.test_start));
          parts.push_back(gen_le_schedule(plan, c.emitter, c.detector, horizon, em));
        }
        auto clicks = process_timeline(c.detector, merge_timelines(parts), trial_stream(c.seed, i, "detector"));
        const auto before = click_times(clicks);
        std::vector<ClickCause> labels;
        for (const auto& k : clicks) labels.push_back(k.cause);
        std::shuffle(labels.begin(), labels.end(), g);
        for (std::size_t k = 0; k < clicks.size(); ++k) clicks[k].cause = labels[k];
        const auto after = click_times(clicks);
        for (const auto& plan : plans) {
          changed += !(evaluate(plan, before, ctx.salt_null) == evaluate(plan, after, ctx.salt_null));
          ++verdicts;
        }
      }
    }

  const bool ok = clicks >= 1'000'000 && violations == 0 && blinded_clicks == 0 && gaps.size() == 100000 &&
                  ks < ks_crit && changed == 0 && verdicts > 0;
  report(8, ok, "dead-time exclusion over 1e6 clicks, blinding exact zero, KS alpha 0.01, label-shuffle invariance",
         fmt("clicks=%.0f violations=%.0f blinded_clicks=%.0f KS D=%.5f (crit %.5f)", double(clicks),
             double(violations), double(blinded_clicks), ks, ks_crit) +
             fmt(" verdicts changed=%.0f/%.0f", double(changed), double(verdicts)));
}

} // namespace

int main() {
  normal_count_distribution();
  salt_separation();
  flag_pulses();
  self_blind();
  recovery_attack();
  error_mathematics();
  determinism();
  property_suites();
  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
