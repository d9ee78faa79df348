// Command-line front end for the blinding self-test simulator.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blindsim/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::string scenario;
  std::string protocol;
  std::string out{"results"};
  unsigned threads{1};
  std::vector<std::string> set;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_out = true) {
  app->add_option("--config", f.config, "key = value config file or a run manifest");
  app->add_option("--seed", f.seed, "master seed (overrides BLINDSIM_SEED and config)");
  app->add_option("--trials", f.trials, "number of trials");
  app->add_option("--scenario", f.scenario, "normal | manipulated | recovery | custom");
  app->add_option("--protocol", f.protocol, "salt | flag | selfblind");
  if (with_out) app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads (does not change results)")->capture_default_str();
  app->add_option("--set", f.set, "override a config key, key=value (repeatable)");
}

blindsim::RunOptions to_options(const CommonFlags& f) {
  blindsim::RunOptions o;
  if (!f.config.empty()) o.config_path = f.config;
  o.seed = f.seed;
  o.trials = f.trials;
  if (!f.scenario.empty()) o.scenario = f.scenario;
  if (!f.protocol.empty()) o.protocol = f.protocol;
  if (const char* env = std::getenv("BLINDSIM_SEED")) o.env_seed = env;
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    o.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  o.out = f.out;
  o.threads = f.threads == 0 ? 1 : f.threads;
  return o;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"blindsim - detector blinding and self-test simulator"};
  app.require_subcommand(1);

  CommonFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run an experiment and store results");
  add_common(simulate, sim_flags);

  CommonFlags fig_flags;
  std::string figure_name;
  auto* figure = app.add_subcommand("figure", "reproduce figure data (fig3b, fig4, fig5, fig6)");
  figure->add_option("name", figure_name, "figure name")->required();
  add_common(figure, fig_flags);

  std::string analyze_dir;
  auto* analyze = app.add_subcommand("analyze", "report verdict accuracy of a results directory");
  analyze->add_option("dir", analyze_dir, "results directory")->required();

  CommonFlags sweep_flags;
  std::string sweep_param;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "vary one numeric parameter and report accuracy");
  sweep->add_option("--param", sweep_param, "dotted config key, e.g. plan.count_threshold")->required();
  sweep->add_option("--values", sweep_values, "values to try")->required()->delimiter(',');
  add_common(sweep, sweep_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? blindsim::kExitOk : blindsim::kExitUsage;
  }

  try {
    if (*simulate) return blindsim::cmd_simulate(to_options(sim_flags), std::cout, std::cerr);
    if (*figure) return blindsim::cmd_figure(figure_name, to_options(fig_flags), std::cout, std::cerr);
    if (*analyze) return blindsim::cmd_analyze(analyze_dir, std::cout, std::cerr);
    if (*sweep)
      return blindsim::cmd_sweep(to_options(sweep_flags), sweep_param, sweep_values, std::cout, std::cerr);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return blindsim::kExitUsage;
  }
  return blindsim::kExitUsage;
}
