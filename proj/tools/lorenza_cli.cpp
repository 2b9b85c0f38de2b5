#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "lorenza/errors.hpp"
#include "lorenza/harness/basin.hpp"
#include "lorenza/harness/memory.hpp"
#include "lorenza/harness/run.hpp"
#include "lorenza/harness/selftest.hpp"

using namespace lorenza;
using namespace lorenza::harness;

namespace {

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed,
            const std::string& resume, std::optional<std::int64_t> stop_after) {
  RunConfig cfg = load_run_config(config);
  TrialOptions opts;
  opts.stop_after = stop_after;
  if (!resume.empty()) {
    const TrialResult r = resume_trial(cfg, resume, opts);
    std::cout << r.metrics_path.string() << " " << r.termination << " steps=" << r.steps << "\n";
    return 0;
  }
  if (seed) {
    const TrialResult r = run_trial(cfg, *seed, opts);
    std::cout << r.metrics_path.string() << " " << r.termination << " steps=" << r.steps << "\n";
    return 0;
  }
  const ExperimentResult res = run_experiment(cfg, opts);
  for (const auto& r : res.trials)
    std::cout << r.metrics_path.string() << " " << r.termination << " steps=" << r.steps << "\n";
  std::cout << res.summary_csv.string() << "\n";
  return 0;
}

int cmd_memory(const std::string& config, bool json) {
  const RunConfig cfg = load_run_config(config);
  const auto objective = make_objective(cfg.objective);
  const MemoryReport rep = memory_report(objective->layout(), cfg.optimizer);
  if (json) std::cout << rep.to_json().dump(2) << "\n";
  else std::cout << rep.to_text();
  return 0;
}

int cmd_basin(const std::vector<std::string>& globs) {
  std::vector<std::filesystem::path> files;
  for (const auto& g : globs) {
    auto more = expand_glob(g);
    files.insert(files.end(), more.begin(), more.end());
  }
  std::cout << format_basin_table(basin_statistics_from_files(files));
  return 0;
}

int cmd_selftest() {
  int failed = 0;
  for (const auto& c : run_selftest()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) {
      std::cout << ": " << c.detail;
      ++failed;
    }
    std::cout << "\n";
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lorenza: low-rank sharpness-aware optimizers and experiment runner"};
  app.require_subcommand(1);

  std::string config, resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> stop_after;
  auto* run = app.add_subcommand("run", "Run the trials of a config");
  run->add_option("--config", config, "JSON run config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run only this trial seed");
  run->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  run->add_option("--stop-after", stop_after, "Stop after this many steps (no summary line)");

  std::string mem_config;
  bool mem_json = false;
  auto* mem = app.add_subcommand("report-memory", "Optimizer-state element counts");
  mem->add_option("--config", mem_config, "JSON run config")->required()->check(CLI::ExistingFile);
  mem->add_flag("--json", mem_json, "Emit JSON");

  std::vector<std::string> globs;
  auto* basin = app.add_subcommand("basin-stats", "Terminal basin counts of double-well runs");
  basin->add_option("--glob", globs, "Metrics files or patterns")->required();

  auto* self = app.add_subcommand("selftest", "Run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }
  try {
    if (*run) return cmd_run(config, seed, resume, stop_after);
    if (*mem) return cmd_memory(mem_config, mem_json);
    if (*basin) return cmd_basin(globs);
    if (*self) return cmd_selftest();
  } catch (const lorenza::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
