#include "blindsim/harness.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "blindsim/error.hpp"

namespace blindsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  h.write_csv(os);
  return os.str();
}

template <class Enum, std::size_t N> Enum enum_from(std::string_view name, const std::array<Enum, N>& all) {
  for (auto e : all)
    if (to_string(e) == name) return e;
  throw IoError("unknown value '" + std::string(name) + "' in trial record");
}

constexpr std::array kStrategies{Strategy::Salt, Strategy::FlagPulse, Strategy::SelfBlind};
constexpr std::array kDecisions{Decision::Normal, Decision::NegativeManipulation, Decision::PositiveManipulation,
                                Decision::Both, Decision::Inconclusive};

json trial_json(const TrialResult& t) {
  json causes = json::object();
  for (std::size_t i = 0; i < kClickCauseCount; ++i)
    causes[std::string(to_string(static_cast<ClickCause>(i)))] = t.cause_counts[i];
  json tests = json::array();
  for (const auto& o : t.tests) {
    tests.push_back({
        {"strategy", to_string(o.plan.strategy)},
        {"test_start_ps", o.plan.test_start},
        {"test_duration_ps", o.plan.test_duration},
        {"salt_rate", o.plan.salt_rate},
        {"response_window_ps", o.plan.response_window},
        {"count_threshold", o.plan.count_threshold},
        {"decision", to_string(o.verdict.decision)},
        {"observed_count", o.verdict.observed_count},
        {"flag_seen", o.verdict.flag_seen},
        {"in_blind_clicks", o.verdict.in_blind_clicks},
        {"p_value", o.verdict.p_value},
        {"response_offsets_ps", o.response_offsets},
    });
  }
  return {{"trial", t.trial_index}, {"stream", t.seed},      {"baseline_count", t.baseline_count},
          {"total_clicks", t.total_clicks}, {"causes", causes}, {"tests", tests}};
}

TrialResult trial_from_json(const json& j) {
  TrialResult t;
  t.trial_index = j.at("trial").get<std::int64_t>();
  t.seed = j.at("stream").get<std::uint64_t>();
  t.baseline_count = j.at("baseline_count").get<std::int64_t>();
  t.total_clicks = j.at("total_clicks").get<std::int64_t>();
  const auto& causes = j.at("causes");
  for (std::size_t i = 0; i < kClickCauseCount; ++i)
    t.cause_counts[i] = causes.at(std::string(to_string(static_cast<ClickCause>(i)))).get<std::int64_t>();
  for (const auto& o : j.at("tests")) {
    TestOutcome out;
    out.plan.strategy = enum_from(o.at("strategy").get<std::string>(), kStrategies);
    out.plan.test_start = o.at("test_start_ps").get<TimePs>();
    out.plan.test_duration = o.at("test_duration_ps").get<TimePs>();
    out.plan.salt_rate = o.at("salt_rate").get<double>();
    out.plan.response_window = o.at("response_window_ps").get<TimePs>();
    out.plan.count_threshold = o.at("count_threshold").get<std::int64_t>();
    out.verdict.decision = enum_from(o.at("decision").get<std::string>(), kDecisions);
    out.verdict.observed_count = o.at("observed_count").get<std::int64_t>();
    out.verdict.flag_seen = o.at("flag_seen").get<bool>();
    out.verdict.in_blind_clicks = o.at("in_blind_clicks").get<std::int64_t>();
    out.verdict.p_value = o.at("p_value").get<double>();
    out.response_offsets = o.at("response_offsets_ps").get<std::vector<TimePs>>();
    t.tests.push_back(std::move(out));
  }
  return t;
}

std::string summary_csv(const ExperimentSummary& s) {
  std::ostringstream os;
  os << "histogram,observations,mean,variance,min,max\n";
  auto row = [&](const char* name, const Histogram& h) {
    os << name << ',' << h.total();
    if (h.total() == 0) {
      os << ",,,,\n";
      return;
    }
    os << ',' << format_double(h.mean()) << ',' << (h.total() > 1 ? format_double(h.variance()) : "") << ','
       << format_double(h.min_value()) << ',' << format_double(h.max_value()) << '\n';
  };
  row("baseline_counts", s.baseline_counts);
  row("test_counts", s.test_counts);
  row("in_blind_counts", s.in_blind_counts);
  row("response_offsets", s.response_offsets);
  os << "\ncounter,value\n";
  os << "tests," << s.tests << '\n';
  os << "flags_seen," << s.flags_seen << '\n';
  for (std::size_t i = 0; i < s.decisions.size(); ++i)
    os << "decision_" << to_string(static_cast<Decision>(i)) << ',' << s.decisions[i] << '\n';
  return os.str();
}

/// Two histograms side by side over the union of their bins.
std::string paired_csv(const Histogram& normal, const Histogram& attacked, double scale_normal = 0.0,
                       double scale_attacked = 0.0) {
  std::map<double, std::pair<double, std::array<std::uint64_t, 2>>> rows;
  auto add = [&](const Histogram& h, int col) {
    for (std::size_t i = 0; i < h.bins(); ++i) {
      auto& r = rows[h.edges()[i]];
      r.first = h.edges()[i + 1];
      r.second[static_cast<std::size_t>(col)] = h.counts()[i];
    }
  };
  add(normal, 0);
  add(attacked, 1);
  std::ostringstream os;
  const bool probs = scale_normal > 0.0;
  os << "bin_low,bin_high," << (probs ? "normal_prob,manipulated_prob" : "normal,manipulated") << '\n';
  for (const auto& [low, r] : rows) {
    os << format_double(low) << ',' << format_double(r.first) << ',';
    if (probs) {
      os << format_double(static_cast<double>(r.second[0]) / scale_normal) << ','
         << format_double(scale_attacked > 0 ? static_cast<double>(r.second[1]) / scale_attacked : 0.0) << '\n';
    } else {
      os << r.second[0] << ',' << r.second[1] << '\n';
    }
  }
  return os.str();
}

struct RunRecord {
  ExperimentConfig config;
  ExperimentResult result;
};

/// Runs an experiment and persists results + manifest into `dir`.
RunRecord run_and_store(const ExperimentConfig& config, const fs::path& dir, unsigned threads,
                        const std::string& command) {
  RunManifest m;
  m.config = to_key_values(config);
  m.seed = config.seed;
  m.command = command;
  m.started = utc_now();
  auto result = run_experiment(config, threads);
  const auto files = write_results(dir, config, result);
  m.finished = utc_now();
  for (const auto& f : files) m.digests[f] = sha256_hex(dir / f);
  write_text(dir / "manifest.json", manifest_to_json(m));
  return {config, std::move(result)};
}

template <class F> int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

std::string ci_text(std::int64_t k, std::int64_t n) {
  if (n == 0) return "n/a";
  const auto ci = clopper_pearson_interval(k, n, 0.95);
  std::ostringstream os;
  os << std::setprecision(6) << static_cast<double>(k) / static_cast<double>(n) << "  [" << ci.low << ", "
     << ci.high << "]";
  return os.str();
}

} // namespace

// ---------------------------------------------------------------------------

std::string manifest_to_json(const RunManifest& m) {
  json j = {{"version", m.version}, {"seed", m.seed},       {"started", m.started},
            {"finished", m.finished}, {"command", m.command}, {"config", m.config},
            {"digests", m.digests}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.command = j.value("command", std::string{});
    m.config = j.at("config").get<KeyValues>();
    m.digests = j.at("digests").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("corrupt manifest: ") + e.what());
  }
}

RunManifest read_manifest(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing manifest " + path.string());
  return manifest_from_json(read_text(path));
}

std::string sha256_hex(const fs::path& file) {
  const auto data = read_text(file);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed for " + file.string());
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

KeyValues read_config_file(const fs::path& path) {
  const auto text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return manifest_from_json(text).config;

  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno), "expected key = value");
    auto strip = [](std::string s) {
      const auto l = s.find_first_not_of(" \t\r");
      const auto r = s.find_last_not_of(" \t\r");
      return l == std::string::npos ? std::string{} : s.substr(l, r - l + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

std::string trial_to_json(const TrialResult& trial) { return trial_json(trial).dump(); }

std::vector<TrialResult> read_trials(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing trial records " + path.string());
  std::vector<TrialResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError("corrupt trial record in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> write_results(const fs::path& dir, const ExperimentConfig& config,
                                       const ExperimentResult& result) {
  ensure_dir(dir);
  std::string lines;
  for (const auto& t : result.trials) lines += trial_to_json(t) + "\n";
  write_text(dir / "trials.jsonl", lines);

  const auto& s = result.summary;
  write_text(dir / "baseline_counts.csv", histogram_csv(s.baseline_counts));
  write_text(dir / "test_counts.csv", histogram_csv(s.test_counts));
  write_text(dir / "in_blind_counts.csv", histogram_csv(s.in_blind_counts));
  write_text(dir / "response_offsets.csv", histogram_csv(s.response_offsets));
  write_text(dir / "summary.csv", summary_csv(s));

  std::string cfg;
  for (const auto& [k, v] : to_key_values(config)) cfg += k + " = " + v + "\n";
  write_text(dir / "config.txt", cfg);

  return {"baseline_counts.csv", "config.txt",  "in_blind_counts.csv", "response_offsets.csv",
          "summary.csv",         "test_counts.csv", "trials.jsonl"};
}

// ---------------------------------------------------------------------------

ExperimentConfig resolve_config(const RunOptions& o) {
  KeyValues file;
  if (o.config_path) file = read_config_file(*o.config_path);

  auto pick = [&](const std::optional<std::string>& cli, const char* key, const char* fallback) {
    if (cli) return *cli;
    if (auto it = file.find(key); it != file.end()) return it->second;
    return std::string(fallback);
  };
  const auto scenario = parse_scenario(pick(o.scenario, "scenario", "normal"));
  const auto strategy = parse_strategy(pick(o.protocol, "plan.strategy", "salt"));

  ExperimentConfig c = reference_config(scenario, strategy);
  for (const auto& [k, v] : file) set_config_value(c, k, v);
  c.scenario = scenario;
  c.plan.strategy = strategy;

  if (o.env_seed && !o.env_seed->empty()) set_config_value(c, "seed", *o.env_seed);
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  for (const auto& [k, v] : o.overrides) set_config_value(c, k, v);
  c.validate();
  return c;
}

int cmd_simulate(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = resolve_config(options);
    const auto rec = run_and_store(config, options.out, options.threads, "simulate");
    const auto& s = rec.result.summary;
    out << "trials " << config.trials << ", tests " << s.tests << ", baseline mean "
        << format_double(s.baseline_counts.total() ? s.baseline_counts.mean() : 0.0) << "\n";
    out << "results written to " << options.out.string() << "\n";
    return kExitOk;
  });
}

int cmd_figure(const std::string& name, const RunOptions& options, std::ostream& out, std::ostream& err) {
  struct Preset {
    Strategy strategy;
    std::int64_t normal_trials;
    std::int64_t manipulated_trials; ///< 0: normal run only
  };
  static const std::map<std::string, Preset> presets = {
      {"fig3b", {Strategy::Salt, 10000, 0}},
      {"fig4", {Strategy::Salt, 7432, 7686}},
      {"fig5", {Strategy::FlagPulse, 12542, 12380}},
      {"fig6", {Strategy::SelfBlind, 7608, 7658}},
  };
  const auto it = presets.find(name);
  if (it == presets.end()) {
    err << "error: unknown figure '" << name << "' (expected fig3b, fig4, fig5, fig6)\n";
    return kExitUsage;
  }
  const auto& p = it->second;

  return guarded(err, [&] {
    auto make = [&](Scenario sc, std::int64_t trials) {
      RunOptions o = options;
      o.scenario = std::string(to_string(sc));
      o.protocol = std::string(to_string(p.strategy));
      if (!o.trials) o.trials = trials;
      return resolve_config(o);
    };
    const fs::path root = options.out;
    ensure_dir(root);

    const auto normal = run_and_store(make(Scenario::Normal, p.normal_trials), root / name / "normal",
                                      options.threads, "figure " + name);
    const auto& ns = normal.result.summary;

    if (name == "fig3b") {
      write_text(root / "fig3b.csv", histogram_csv(ns.baseline_counts));
      out << "fig3b: " << ns.baseline_counts.total() << " windows, mean "
          << format_double(ns.baseline_counts.mean()) << ", variance " << format_double(ns.baseline_counts.variance())
          << "\n";
      return kExitOk;
    }

    const auto attacked = run_and_store(make(Scenario::Manipulated, p.manipulated_trials),
                                        root / name / "manipulated", options.threads, "figure " + name);
    const auto& ms = attacked.result.summary;

    std::ostringstream summary;
    summary << "scenario,tests,events,fraction,ci_low,ci_high,mean_count\n";
    auto line = [&](const char* label, const ExperimentSummary& s, std::int64_t events) {
      const auto ci = clopper_pearson_interval(events, s.tests, 0.95);
      summary << label << ',' << s.tests << ',' << events << ','
              << format_double(s.tests ? static_cast<double>(events) / static_cast<double>(s.tests) : 0.0) << ','
              << format_double(ci.low) << ',' << format_double(ci.high) << ','
              << format_double(s.test_counts.total() ? s.test_counts.mean() : 0.0) << '\n';
    };

    if (name == "fig4") {
      write_text(root / "fig4.csv", paired_csv(ns.test_counts, ms.test_counts));
      const auto threshold = static_cast<double>(normal.config.plan.count_threshold);
      line("normal", ns, static_cast<std::int64_t>(ns.test_counts.count_at_least(threshold)));
      line("manipulated", ms, static_cast<std::int64_t>(ms.test_counts.count_at_least(threshold)));
    } else if (name == "fig5") {
      write_text(root / "fig5.csv", paired_csv(ns.response_offsets, ms.response_offsets,
                                               static_cast<double>(ns.tests), static_cast<double>(ms.tests)));
      line("normal", ns, ns.flags_seen);
      line("manipulated", ms, ms.flags_seen);
    } else {
      write_text(root / "fig6.csv", paired_csv(ns.in_blind_counts, ms.in_blind_counts));
      line("normal", ns, ns.flags_seen);
      line("manipulated", ms, ms.flags_seen);
    }
    write_text(root / (name + "_summary.csv"), summary.str());
    out << summary.str();
    return kExitOk;
  });
}

std::string analyze_report(const RunManifest& manifest, const std::vector<TrialResult>& trials) {
  std::array<std::int64_t, 5> decisions{};
  std::int64_t tests = 0;
  for (const auto& t : trials)
    for (const auto& o : t.tests) {
      ++tests;
      ++decisions[static_cast<std::size_t>(o.verdict.decision)];
    }
  const auto sc = manifest.config.count("scenario") ? manifest.config.at("scenario") : std::string("normal");
  const bool attacked = parse_scenario(sc) != Scenario::Normal;
  const auto judged_normal = decisions[static_cast<std::size_t>(Decision::Normal)];
  const auto inconclusive = decisions[static_cast<std::size_t>(Decision::Inconclusive)];
  const auto decisive = tests - inconclusive;
  const auto judged_manipulated = decisive - judged_normal;

  std::ostringstream os;
  os << "scenario      " << sc << "\n";
  os << "strategy      " << (manifest.config.count("plan.strategy") ? manifest.config.at("plan.strategy") : "?")
     << "\n";
  os << "seed          " << manifest.seed << "\n";
  os << "trials        " << trials.size() << "\n";
  os << "tests         " << tests << "\n\n";
  os << "verdict                  count\n";
  for (std::size_t i = 0; i < decisions.size(); ++i)
    os << std::left << std::setw(25) << to_string(static_cast<Decision>(i)) << decisions[i] << "\n";
  os << "\n";
  const auto correct = attacked ? judged_manipulated : judged_normal;
  os << "accuracy      " << ci_text(correct, decisive) << "\n";
  if (attacked)
    os << "miss rate     " << ci_text(judged_normal, decisive) << "\n";
  else
    os << "false alarm   " << ci_text(judged_manipulated, decisive) << "\n";
  os << "(rates over " << decisive << " decisive tests, 95% Clopper-Pearson)\n";
  return os.str();
}

int cmd_analyze(const fs::path& dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto manifest = read_manifest(dir / "manifest.json");
    for (const auto& [file, digest] : manifest.digests) {
      if (!fs::is_regular_file(dir / file)) throw IoError("missing result file " + (dir / file).string());
      if (sha256_hex(dir / file) != digest) throw IoError("digest mismatch for " + (dir / file).string());
    }
    out << analyze_report(manifest, read_trials(dir / "trials.jsonl"));
    return kExitOk;
  });
}

int cmd_sweep(const RunOptions& options, const std::string& path, const std::vector<double>& values,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (values.empty()) throw ValidationError("--values", "at least one value required");
    const auto config = resolve_config(options);
    const auto rows = sweep(config, path, values, options.threads);

    std::ostringstream csv;
    csv << "param,value,normal_accuracy,manipulated_accuracy,balanced_accuracy,false_alarm_rate,miss_rate,"
           "normal_mean_count,manipulated_mean_count\n";
    for (const auto& r : rows)
      csv << path << ',' << format_double(r.value) << ',' << format_double(r.normal_accuracy) << ','
          << format_double(r.manipulated_accuracy) << ',' << format_double(r.balanced_accuracy) << ','
          << format_double(r.false_alarm_rate) << ',' << format_double(r.miss_rate) << ','
          << format_double(r.normal_mean_count) << ',' << format_double(r.manipulated_mean_count) << '\n';

    ensure_dir(options.out);
    write_text(options.out / "sweep.csv", csv.str());
    RunManifest m;
    m.config = to_key_values(config);
    m.seed = config.seed;
    m.command = "sweep " + path;
    m.started = m.finished = utc_now();
    m.digests["sweep.csv"] = sha256_hex(options.out / "sweep.csv");
    write_text(options.out / "manifest.json", manifest_to_json(m));
    out << csv.str();
    return kExitOk;
  });
}

} // namespace blindsim
