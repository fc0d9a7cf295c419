// Command-line front end: run scenarios, drive DoS sweeps, aggregate run
// reports, and validate configuration files.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "scadasim/harness.hpp"

namespace fs = std::filesystem;
using namespace scadasim;

namespace {

std::string resolve_scenario_path(const std::string& arg, const std::string& config_dir) {
  if (arg.find('/') != std::string::npos || arg.size() > 5 && arg.substr(arg.size() - 5) == ".json")
    return arg;
  std::string lower = arg;
  for (auto& c : lower) c = static_cast<char>(std::tolower(c));
  return config_dir + "/scenarios/" + lower + ".json";
}

int run_command(const std::string& scenario_arg, const std::string& config_dir,
                const config::Overrides& ov, const std::string& out_dir) {
  config::Scenario sc = config::load_scenario(resolve_scenario_path(scenario_arg, config_dir), ov);
  std::cout << "running scenario " << sc.id << " (kind " << config::to_string(sc.kind) << ", seed "
            << sc.seed << ", " << sc.virtual_duration() << " s virtual)\n";
  harness::RunOutputs out = harness::run_scenario(sc);
  if (!out_dir.empty()) {
    harness::write_outputs(out, out_dir);
    std::cout << "wrote " << out_dir << "/{events.jsonl,metrics.csv,alerts.csv,report.json,report.txt}\n";
  }
  std::cout << harness::report_text(out.report);
  return 0;
}

int sweep_command(const std::string& kind, const std::string& target, int seeds,
                  const std::string& scenario_arg, const std::string& config_dir,
                  const config::Overrides& ov, const std::string& out_dir) {
  std::string arg = scenario_arg;
  if (arg.empty()) arg = kind == "payload" ? "dos_payload" : "dos_interval";
  config::Scenario base = config::load_scenario(resolve_scenario_path(arg, config_dir), ov);
  std::vector<std::string> targets;
  if (target == "both") {
    targets = {"sub", "ucc"};
  } else {
    targets = {target};
  }
  std::cout << "sweeping " << kind << " against " << target << " with " << seeds << " seeds\n";
  harness::SweepResult result = harness::run_sweep(base, seeds, targets);
  std::string trend = harness::sweep_csv(result);
  std::cout << trend;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/trend.csv") << trend;
    std::ofstream(out_dir + "/trials.csv") << harness::sweep_trials_csv(result);
    std::cout << "wrote " << out_dir << "/{trend.csv,trials.csv}\n";
  }
  return 0;
}

int report_command(const std::vector<std::string>& inputs, const std::string& out_dir) {
  std::vector<harness::Json> reports;
  for (const auto& in : inputs) {
    fs::path p(in);
    std::vector<fs::path> candidates;
    if (fs::is_directory(p)) {
      if (fs::exists(p / "report.json")) {
        candidates.push_back(p / "report.json");
      } else {
        for (const auto& sub : fs::directory_iterator(p))
          if (sub.is_directory() && fs::exists(sub.path() / "report.json"))
            candidates.push_back(sub.path() / "report.json");
      }
    } else if (fs::exists(p)) {
      candidates.push_back(p);
    }
    for (const auto& c : candidates) {
      std::ifstream f(c);
      harness::Json j;
      f >> j;
      reports.push_back(std::move(j));
    }
  }
  auto rows = harness::aggregate_reports(reports);  // throws EmptyInput when none
  std::string text = harness::aggregate_text(rows);
  std::cout << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/summary.txt") << text;
    std::ofstream(out_dir + "/summary.csv") << harness::aggregate_csv(rows);
    std::cout << "wrote " << out_dir << "/{summary.txt,summary.csv}\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic SCADA/DNP3 co-simulation testbed"};
  app.require_subcommand(1);

  std::string config_dir = "configs";
  app.add_option("--config-dir", config_dir, "directory holding shipped configuration files");

  std::string scenario;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double duration = 0;
  int masters = 0;
  double poll_interval = 0;

  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("--scenario", scenario, "scenario id (BASELINE, UC1..UC4, ...) or config path")
      ->required();
  run->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--duration", duration, "override the duration (unscaled seconds)");
  run->add_option("--masters", masters, "override the master/outstation pair count (1, 5 or 10)");
  run->add_option("--poll-interval", poll_interval, "override the poll interval (unscaled seconds)");
  run->add_option("--out-dir", out_dir, "directory for events/metrics/alerts/report outputs");

  std::string sweep_kind = "payload", sweep_target = "both";
  int sweep_seeds = 5;
  auto* sweep = app.add_subcommand("sweep", "run a DoS trial sweep");
  sweep->add_option("--kind", sweep_kind, "payload or interval")
      ->check(CLI::IsMember({"payload", "interval"}));
  sweep->add_option("--target", sweep_target, "sub, ucc or both")
      ->check(CLI::IsMember({"sub", "ucc", "both"}));
  sweep->add_option("--seeds", sweep_seeds, "seeds per sweep point (>= 1)");
  sweep->add_option("--scenario", scenario, "override the sweep scenario config");
  sweep->add_option("--seed", seed, "override the base seed")->each([&](const std::string&) {
    seed_set = true;
  });
  sweep->add_option("--out-dir", out_dir, "directory for trend/trials CSV outputs");

  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "aggregate run reports into summary tables");
  report->add_option("--in", report_inputs, "run output directory or report.json (repeatable)")
      ->required();
  report->add_option("--out-dir", out_dir, "directory for summary.txt / summary.csv");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "validate a scenario configuration");
  validate->add_option("--config", validate_path, "scenario config path")->required();

  CLI11_PARSE(app, argc, argv);

  config::Overrides ov;
  if (seed_set) ov.seed = seed;
  if (duration > 0) ov.duration_s = duration;
  if (masters > 0) ov.masters = masters;
  if (poll_interval > 0) ov.poll_interval_s = poll_interval;

  try {
    if (run->parsed()) return run_command(scenario, config_dir, ov, out_dir);
    if (sweep->parsed())
      return sweep_command(sweep_kind, sweep_target, sweep_seeds, scenario, config_dir, ov, out_dir);
    if (report->parsed()) return report_command(report_inputs, out_dir);
    if (validate->parsed()) {
      config::Scenario sc = config::load_scenario(validate_path, ov);
      std::cout << "ok: " << sc.id << " (kind " << config::to_string(sc.kind) << ", "
                << sc.pointmaps.size() << " outstations, seed " << sc.seed << ")\n";
      return 0;
    }
  } catch (const config::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const harness::EmptyInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
