// edgeform: run formation-control scenarios from JSON files.
//
//   edgeform run SCENARIO [--out DIR] [--set key=value ...]
//   edgeform check SCENARIO [--set key=value ...]
//   edgeform lemma1 FILE
//   edgeform sweep SCENARIO... [--out DIR] [--jobs K] [--set key=value ...]
//
// Exit codes: 0 completed, 1 usage or I/O error, 2 initial-constraint
// violation, 3 funnel violation during the run. `sweep` returns the largest
// code among its scenarios.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "edgeform/scenario_io.hpp"

namespace fs = std::filesystem;
using edgeform::RunStatus;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInitialViolation = 2;
constexpr int kFunnelViolation = 3;

const char* axis_name(int axis) {
  static const char* const names[] = {"x", "y", "z"};
  return names[axis];
}

int exit_code(RunStatus status) {
  switch (status) {
    case RunStatus::Completed:
      return kOk;
    case RunStatus::InitialConstraintViolation:
      return kInitialViolation;
    case RunStatus::FunnelViolation:
      return kFunnelViolation;
  }
  return kUsage;
}

std::string describe_violations(const edgeform::RunResult& result) {
  std::ostringstream out;
  for (const auto& v : result.violations) {
    out << "  edge " << v.edge + 1 << " axis " << axis_name(v.axis) << " t=" << v.time
        << " e=" << v.e_tilde << " zeta=" << v.zeta << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

struct Outcome {
  int code = kUsage;
  std::string report;  // printed to stdout
  std::string errors;  // printed to stderr
};

Outcome run_one(const std::string& scenario_path, const fs::path& out_dir, const std::vector<std::string>& overrides) {
  Outcome outcome;
  try {
    const edgeform::ScenarioConfig config = edgeform::parse_scenario(scenario_path, overrides);
    const edgeform::RunResult result = edgeform::run_scenario(config);

    fs::create_directories(out_dir);
    const std::string stem = fs::path(scenario_path).stem().string();
    std::ostringstream csv;
    edgeform::write_csv(result.log, csv);
    write_text(out_dir / (stem + ".csv"), csv.str());
    write_text(out_dir / (stem + ".metrics.json"), edgeform::metrics_to_json(config, result).dump(2) + "\n");

    outcome.code = exit_code(result.status);
    std::ostringstream report;
    report << stem << ": " << to_string(result.status) << " (t=" << result.metrics.end_time
           << " s, steps=" << result.metrics.steps << ", max|e| final window="
           << result.metrics.max_abs_error_final_window << ", runtime=" << result.metrics.runtime_seconds
           << " s)\n";
    outcome.report = report.str();
    if (!result.violations.empty()) {
      outcome.errors = stem + ": violated edges\n" + describe_violations(result);
    }
  } catch (const std::exception& e) {
    outcome.code = kUsage;
    outcome.errors = std::string("error: ") + e.what() + "\n";
  }
  return outcome;
}

int cmd_run(const std::string& scenario, const std::string& out_dir, const std::vector<std::string>& overrides) {
  const Outcome outcome = run_one(scenario, out_dir, overrides);
  std::cout << outcome.report;
  std::cerr << outcome.errors;
  return outcome.code;
}

int cmd_check(const std::string& scenario, const std::vector<std::string>& overrides) {
  try {
    const edgeform::ScenarioConfig config = edgeform::parse_scenario(scenario, overrides);
    const edgeform::InitialCheck check = edgeform::check_initial(config);
    if (check.pass()) {
      std::cout << "initial constraint satisfied on all " << config.topology.num_edges() << " edges\n";
      return kOk;
    }
    edgeform::RunResult shim;
    shim.violations = check.violations;
    std::cout << "initial constraint violated\n" << describe_violations(shim);
    return kInitialViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}

int cmd_lemma1(const std::string& path) {
  try {
    const nlohmann::json doc = edgeform::load_json_file(path);
    const edgeform::Topology topology =
        edgeform::topology_from_json(doc.contains("topology") ? doc.at("topology") : doc);
    const edgeform::SpectralReport report = edgeform::lemma1_certificate(topology);
    const nlohmann::json out{{"class", to_string(report.topology_class)},
                             {"matrix", report.matrix},
                             {"lambda_min", report.lambda_min},
                             {"lambda_max", report.lambda_max},
                             {"pass", report.pass}};
    std::cout << out.dump(2) << '\n';
    return report.pass ? kOk : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}

int cmd_sweep(const std::vector<std::string>& scenarios, const std::string& out_dir, unsigned jobs,
              const std::vector<std::string>& overrides) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(jobs == 0 ? hw : jobs, static_cast<unsigned>(scenarios.size()));
  std::vector<Outcome> outcomes(scenarios.size());
  std::atomic<std::size_t> next{0};
  std::mutex print_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
          outcomes[i] = run_one(scenarios[i], out_dir, overrides);
          const std::lock_guard lock(print_mutex);
          std::cout << outcomes[i].report << std::flush;
          std::cerr << outcomes[i].errors << std::flush;
        }
      });
    }
  }
  int worst = kOk;
  for (const auto& o : outcomes) worst = std::max(worst, o.code);
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed formation control with prescribed edge performance"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::vector<std::string> sweep_files;
  unsigned jobs = 0;

  auto* run = app.add_subcommand("run", "Simulate one scenario and write CSV + metrics");
  run->add_option("scenario", scenario, "Scenario JSON file")->required();
  run->add_option("-o,--out", out_dir, "Output directory");
  run->add_option("--set", overrides, "Override key=value (dotted path, zero-based indices)");

  auto* check = app.add_subcommand("check", "Check the initial constraint only");
  check->add_option("scenario", scenario, "Scenario JSON file")->required();
  check->add_option("--set", overrides, "Override key=value");

  auto* lemma = app.add_subcommand("lemma1", "Spectral certificate for a topology or scenario file");
  lemma->add_option("file", scenario, "Topology or scenario JSON file")->required();

  auto* sweep = app.add_subcommand("sweep", "Run several scenarios on a worker pool");
  sweep->add_option("scenarios", sweep_files, "Scenario JSON files")->required();
  sweep->add_option("-o,--out", out_dir, "Output directory");
  sweep->add_option("-j,--jobs", jobs, "Worker threads (0 = hardware concurrency)");
  sweep->add_option("--set", overrides, "Override applied to every scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*run) return cmd_run(scenario, out_dir, overrides);
  if (*check) return cmd_check(scenario, overrides);
  if (*lemma) return cmd_lemma1(scenario);
  return cmd_sweep(sweep_files, out_dir, jobs, overrides);
}
