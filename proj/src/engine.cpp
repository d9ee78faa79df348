#include "blindsim/engine.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "blindsim/error.hpp"
#include "blindsim/optics.hpp"

namespace blindsim {

DetectorParams reference_detector() {
  DetectorParams d;
  d.dark_rate = 7e3;
  d.afterpulse_prob = 0.4;
  d.afterpulse_tau = 1e-6;
  d.afterpulse_cascade = true;
  d.blind_power = kBlindPower;
  d.fake_energy = 1e-15;
  d.recovery_click_prob = 0.0;
  d.max_rate_ref = 5e5;

  // An armed detector always fires on the self-blind onset, so the onset
  // response probability is the armed fraction at the reference rate.
  d.dead_time = calibrate_dead_time(d, kOnsetResponseProb, kReferenceClickRate);

  // A flag pulse of k photons fires an armed detector with 1 - (1 - eta)^k.
  const double per_armed = kFlagResponseProb / kOnsetResponseProb;
  d.efficiency = 1.0 - std::pow(1.0 - per_armed, 1.0 / EmitterSettings{}.flag_photons);

  // Electrical noise: Poisson events hitting the in-blind part of a run.
  const double in_blind_span = kReferenceWindow - kResponseWindow;
  d.noise_rate = -std::log1p(-kInBlindNoiseFraction) / in_blind_span;
  return d;
}

ExperimentConfig reference_config(Scenario scenario, Strategy strategy) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.detector = reference_detector();
  if (scenario == Scenario::RecoveryAttack) c.detector.recovery_click_prob = 1.0;

  const double primary = solve_primary_rate(c.detector, kReferenceClickRate);
  c.signal_rate = (primary - c.detector.dark_rate - c.detector.noise_rate) / c.detector.efficiency;

  c.attack.blind_power_level = kBlindPower;
  c.attack.fake_pulse_rate = scenario == Scenario::RecoveryAttack ? 0.0 : kReferenceClickRate;
  c.attack.fake_peak_power = kFakePeakPower;
  c.attack.fake_width = kFakeWidth;

  c.plan.strategy = strategy;
  c.plan.response_window = to_ps(kResponseWindow);
  c.plan.count_threshold = 50;
  c.plan.test_duration = to_ps(strategy == Strategy::FlagPulse ? kFlagWidth : kReferenceWindow);
  if (strategy == Strategy::Salt) {
    const double salted = solve_primary_rate(c.detector, kSaltTestMean / kReferenceWindow);
    c.plan.salt_rate = (salted - primary) / c.detector.efficiency;
  }

  c.trial_duration = 1e-3;
  c.warmup = 100e-6;
  c.baseline_window = kReferenceWindow;
  c.tests_per_trial = 1;
  c.trials = 1000;
  c.seed = 20211018;
  return c;
}

// ---------------------------------------------------------------------------

EngineContext prepare(const ExperimentConfig& config) {
  config.validate();
  EngineContext ctx{config, PoissonModel{kSaltTestMean}};
  if (config.plan.strategy == Strategy::Salt && config.plan.test_duration > 0) {
    const auto rng = RandomStream{config.seed}.split("salt-null");
    ctx.salt_null = EmpiricalModel{count_distribution_oracle(
        config.detector, config.signal_rate + config.plan.salt_rate, to_seconds(config.plan.test_duration),
        config.salt_null_trials, rng, config.warmup)};
  }
  return ctx;
}

TrialResult run_trial(const EngineContext& context, std::int64_t trial_index) {
  const auto& cfg = context.config;
  const auto base = RandomStream{cfg.seed}.split(static_cast<std::uint64_t>(trial_index));

  TrialResult out;
  out.trial_index = trial_index;
  out.seed = base.key();

  const TimePs duration = to_ps(cfg.trial_duration);
  if (duration == 0) return out;

  const TimePs baseline_begin = to_ps(cfg.warmup);
  const TimePs baseline_end = baseline_begin + to_ps(cfg.baseline_window);

  auto schedule_rng = base.split("schedule");
  const auto plans = schedule_test_count(cfg.plan, cfg.tests_per_trial, baseline_end, duration, schedule_rng);

  std::vector<OpticalTimeline> fragments;
  auto signal_rng = base.split("signal");
  fragments.push_back({duration, gen_photons(cfg.signal_rate, 0, duration, PhotonSource::Signal, signal_rng), {}, {}});

  std::optional<AttackScenario> attack;
  switch (cfg.scenario) {
  case Scenario::Normal:
    break;
  case Scenario::Manipulated:
    attack = cfg.attack;
    attack->stop_blind_at.reset();
    break;
  case Scenario::RecoveryAttack:
    attack = cfg.attack;
    if (!plans.empty()) {
      const auto& first = plans.front();
      const auto into = static_cast<TimePs>(std::llround(cfg.recovery_stop_fraction *
                                                         static_cast<double>(first.test_duration)));
      attack->stop_blind_at = to_seconds(first.test_start + into);
    }
    break;
  case Scenario::Custom:
    attack = cfg.attack;
    break;
  }
  if (attack) {
    auto attack_rng = base.split("attack");
    fragments.push_back(gen_attack(*attack, duration, attack_rng));
  }

  const auto emitter_rng = base.split("emitter");
  for (std::size_t i = 0; i < plans.size(); ++i) {
    auto rng = emitter_rng.split(static_cast<std::uint64_t>(i));
    fragments.push_back(gen_le_schedule(plans[i], cfg.emitter, cfg.detector, duration, rng));
  }

  const auto timeline = merge_timelines(fragments);
  const auto clicks = process_timeline(cfg.detector, timeline, base.split("detector"));
  const auto times = click_times(clicks);

  out.total_clicks = static_cast<std::int64_t>(clicks.size());
  for (const auto& c : clicks) ++out.cause_counts[static_cast<std::size_t>(c.cause)];
  out.baseline_count = count_in(times, baseline_begin, baseline_end);

  for (const auto& plan : plans) {
    TestOutcome t;
    t.plan = plan;
    t.verdict = evaluate(plan, times, context.salt_null);
    const auto lo = std::lower_bound(times.begin(), times.end(), plan.test_start);
    const auto hi = std::lower_bound(lo, times.end(), plan.test_start + kResponseTrace);
    for (auto it = lo; it != hi; ++it) t.response_offsets.push_back(*it - plan.test_start);
    out.tests.push_back(std::move(t));
  }
  return out;
}

TrialResult run_trial(const ExperimentConfig& config, std::int64_t trial_index) {
  return run_trial(prepare(config), trial_index);
}

ExperimentSummary summarize(const ExperimentConfig& config, const std::vector<TrialResult>& trials) {
  ExperimentSummary s;
  std::vector<std::int64_t> baseline;
  std::vector<std::int64_t> test_counts;
  std::vector<std::int64_t> in_blind;
  s.response_offsets = Histogram::uniform(0.0, to_seconds(kResponseTrace), 10e-9);

  const bool has_baseline = to_ps(config.trial_duration) > 0 && to_ps(config.baseline_window) > 0;
  for (const auto& tr : trials) {
    if (has_baseline) baseline.push_back(tr.baseline_count);
    for (const auto& t : tr.tests) {
      ++s.tests;
      ++s.decisions[static_cast<std::size_t>(t.verdict.decision)];
      if (t.verdict.flag_seen) ++s.flags_seen;
      test_counts.push_back(t.verdict.observed_count);
      if (t.plan.strategy == Strategy::SelfBlind) in_blind.push_back(t.verdict.in_blind_clicks);
      for (auto off : t.response_offsets) s.response_offsets.add(to_seconds(off));
    }
  }
  s.baseline_counts = Histogram::integer_counts(baseline);
  s.test_counts = Histogram::integer_counts(test_counts);
  s.in_blind_counts = Histogram::integer_counts(in_blind);
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  const auto ctx = prepare(config);
  ExperimentResult result;
  result.trials.resize(static_cast<std::size_t>(config.trials));

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(config.trials)));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= config.trials) return;
      try {
        result.trials[static_cast<std::size_t>(i)] = run_trial(ctx, i);
      } catch (...) {
        std::lock_guard lock{failure_mutex};
        if (!failure) failure = std::current_exception();
        next = config.trials;
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  result.summary = summarize(config, result.trials);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

struct Tally {
  std::int64_t tests{0};
  std::int64_t judged_normal{0};
  std::int64_t judged_manipulated{0};
  double count_sum{0.0};
};

Tally tally(const ExperimentResult& r) {
  Tally t;
  for (const auto& tr : r.trials)
    for (const auto& test : tr.tests) {
      ++t.tests;
      t.count_sum += static_cast<double>(test.verdict.observed_count);
      if (test.verdict.decision == Decision::Normal) ++t.judged_normal;
      else if (test.verdict.decision != Decision::Inconclusive) ++t.judged_manipulated;
    }
  return t;
}

double ratio(std::int64_t a, std::int64_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

} // namespace

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& path, const std::vector<double>& values,
                            unsigned threads) {
  if (!is_numeric_key(path)) throw ValidationError(path, "not a numeric configuration key");

  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig normal = config;
    set_config_value(normal, path, format_double(v));
    normal.scenario = Scenario::Normal;
    ExperimentConfig attacked = normal;
    attacked.scenario = config.scenario == Scenario::Normal ? Scenario::Manipulated : config.scenario;

    const auto n = tally(run_experiment(normal, threads));
    const auto m = tally(run_experiment(attacked, threads));

    SweepRow row;
    row.value = v;
    row.normal_accuracy = ratio(n.judged_normal, n.tests);
    row.manipulated_accuracy = ratio(m.judged_manipulated, m.tests);
    row.balanced_accuracy = 0.5 * (row.normal_accuracy + row.manipulated_accuracy);
    row.false_alarm_rate = ratio(n.judged_manipulated, n.tests);
    row.miss_rate = ratio(m.judged_normal, m.tests);
    row.normal_mean_count = n.tests ? n.count_sum / static_cast<double>(n.tests) : 0.0;
    row.manipulated_mean_count = m.tests ? m.count_sum / static_cast<double>(m.tests) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

} // namespace blindsim
