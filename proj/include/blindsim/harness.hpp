#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blindsim/config.hpp"
#include "blindsim/engine.hpp"

namespace blindsim {

inline constexpr const char* kArtifactVersion = "blindsim 1.0.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2 };

/// Provenance record written next to every result set.
struct RunManifest {
  KeyValues config;
  std::string version{kArtifactVersion};
  std::uint64_t seed{0};
  std::string started;
  std::string finished;
  std::string command;
  std::map<std::string, std::string> digests; ///< file name -> sha256 hex

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

/// Throws IoError if the file is missing or not a valid manifest.
RunManifest read_manifest(const std::filesystem::path& path);

std::string sha256_hex(const std::filesystem::path& file);

/// Reads `key = value` lines (`#` starts a comment) or, if the file is a
/// JSON manifest, its config snapshot.
KeyValues read_config_file(const std::filesystem::path& path);

/// Parses the line-delimited trial records written by write_results.
std::vector<TrialResult> read_trials(const std::filesystem::path& path);
std::string trial_to_json(const TrialResult& trial);

/// Writes trials.jsonl, the summary histograms and summary.csv into `dir`.
/// Returns the written file names, all deterministic in (config, result).
std::vector<std::string> write_results(const std::filesystem::path& dir, const ExperimentConfig& config,
                                       const ExperimentResult& result);

// ---------------------------------------------------------------------------
// Commands. Each returns an ExitCode and reports problems on `err`.
// ---------------------------------------------------------------------------

struct RunOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<std::string> scenario;
  std::optional<std::string> protocol;
  std::optional<std::string> env_seed; ///< value of BLINDSIM_SEED, if set
  std::vector<std::pair<std::string, std::string>> overrides; ///< --set key=value
  std::filesystem::path out{"results"};
  unsigned threads{1};
};

/// Preset for (scenario, protocol) < config file < BLINDSIM_SEED < --seed,
/// --trials, --scenario, --protocol, --set.
ExperimentConfig resolve_config(const RunOptions& options);

int cmd_simulate(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_figure(const std::string& name, const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_analyze(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& options, const std::string& path, const std::vector<double>& values,
              std::ostream& out, std::ostream& err);

/// Accuracy / error-rate report for a results directory.
std::string analyze_report(const RunManifest& manifest, const std::vector<TrialResult>& trials);

} // namespace blindsim
