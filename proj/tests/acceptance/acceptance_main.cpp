// Acceptance suite: prints one PASS/FAIL line per criterion, with indented
// detail lines, and exits non-zero if any criterion fails. INFO lines are
// diagnostics that do not affect the verdict.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edgeform/controller.hpp"
#include "edgeform/rk4.hpp"
#include "edgeform/scenario_io.hpp"
#include "test_support.hpp"

using namespace edgeform;
using namespace edgeform::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kReferenceDt = 1e-3;
constexpr double kHorizon = 15.0;
constexpr double kFinalErrorTol = 0.02;
constexpr double kRuntimeLimit = 10.0;
constexpr double kBoundTol = 5e-3;
constexpr double kPaperLower = -0.25;
constexpr double kPaperUpper = 0.83;
constexpr double kLemmaThreshold = 1e-9;
constexpr double kReconstructTol = 1e-10;
constexpr double kRoundTripTol = 1e-12;
constexpr double kSdotTol = 1e-6;
constexpr double kAlphaDotTol = 1e-5;
constexpr double kThetaEnvelope = 10.0;
constexpr double kLyapunovSlack = 1e-6;
constexpr double kLyapunovSpacing = 0.1;
constexpr double kRk4RatioLo = 12.0;
constexpr double kRk4RatioHi = 20.0;
constexpr int kRandomGraphs = 200;

const fs::path kScenarioDir = EDGEFORM_SCENARIO_DIR;
const std::string kCli = EDGEFORM_CLI;

int failures = 0;

void verdict(bool pass, const std::string& name, const std::string& summary) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << summary << '\n';
  if (!pass) ++failures;
}

void detail(const std::string& line) { std::cout << "     " << line << '\n'; }

void info(const std::string& line) { std::cout << "INFO " << line << '\n'; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

struct Case {
  std::string name;
  std::string file;
  Topology topology;
  Eigen::MatrixXd positions;
};

std::vector<Case> asymmetric_cases() {
  return {{"spanning tree", "fig2a_spanning_tree", pentagon_tree(), tree_initial_positions()},
          {"directed cycle", "fig2b_directed_cycle", pentagon_cycle(), cycle_initial_positions()},
          {"undirected", "fig2c_undirected", pentagon_cycle(Directedness::Undirected), cycle_initial_positions()}};
}

std::vector<Case> global_cases() {
  return {{"spanning tree", "fig3_global", pentagon_tree(), global_initial_positions()},
          {"directed cycle", "fig3b_global_cycle", pentagon_cycle(), global_initial_positions()},
          {"undirected", "fig3c_global_undirected", pentagon_cycle(Directedness::Undirected),
           global_initial_positions()}};
}

double final_edge_error(const RunResult& r) {
  if (r.status != RunStatus::Completed || r.log.rows.empty()) return std::numeric_limits<double>::infinity();
  return r.metrics.final_max_abs_error;
}

double initial_edge_error(const ScenarioConfig& c) {
  const GraphModel g = GraphModel::build(c.topology);
  return edge_errors(c.initial.x[0], c.target.edge_offsets(g), g.E).cwiseAbs().maxCoeff();
}

std::string describe(const RunResult& r) {
  std::string s = to_string(r.status) + ", violations " + std::to_string(r.metrics.violation_count);
  if (!r.violations.empty()) {
    const auto& v = r.violations.front();
    s += " (first: edge " + std::to_string(v.edge + 1) + " axis " + std::to_string(v.axis + 1) + " at t=" +
         fmt(v.time) + ")";
  }
  s += ", max|e(15)| " + fmt(final_edge_error(r)) + ", runtime " + fmt(r.metrics.runtime_seconds) + " s";
  return s;
}

// ---------------------------------------------------------------------------

void asymmetric_reproduction() {
  bool pass = true;
  std::vector<std::string> lines;
  for (const Case& c : asymmetric_cases()) {
    ScenarioConfig config = reference_scenario(c.topology, c.positions, asymmetric_spec(), 1.0);
    config.dt = kReferenceDt;
    config.horizon = kHorizon;
    config.log_stride = 100;
    const RunResult r = run_scenario(config);
    const bool ok = r.status == RunStatus::Completed && r.metrics.violation_count == 0 &&
                    final_edge_error(r) < kFinalErrorTol && r.metrics.runtime_seconds < kRuntimeLimit;
    pass = pass && ok;
    lines.push_back(c.name + ": " + describe(r));
  }
  verdict(pass, "asymmetric funnel reproduction at dt=1e-3",
          "zero violations, max|e(15)| < 0.02, runtime < 10 s on all three graphs");
  for (const auto& l : lines) detail(l);
}

// The same three scenarios at the step sizes shipped in the bundled files.
std::vector<std::pair<Case, ScenarioConfig>> stable_configs() {
  std::vector<std::pair<Case, ScenarioConfig>> out;
  for (const Case& c : asymmetric_cases()) {
    ScenarioConfig config = parse_scenario((kScenarioDir / (c.file + ".json")).string());
    config.log_stride = static_cast<int>(std::lround(kLyapunovSpacing / config.dt));
    out.emplace_back(c, config);
  }
  return out;
}

void asymmetric_stable_step(const std::vector<std::pair<Case, ScenarioConfig>>& configs,
                            std::vector<RunResult>& results) {
  for (const auto& [c, config] : configs) {
    results.push_back(run_scenario(config));
    info("same scenario at bundled dt=" + fmt(config.dt) + " (" + c.name + "): " + describe(results.back()));
  }
}

void global_reproduction() {
  bool pass = true;
  std::vector<std::string> lines;
  for (const Case& c : global_cases()) {
    ScenarioConfig config = reference_scenario(c.topology, c.positions, global_spec(), 2.0);
    config.dt = kReferenceDt;
    config.horizon = kHorizon;
    config.log_stride = 100;
    const double e0 = initial_edge_error(config);
    const RunResult r = run_scenario(config);
    const bool ok = !r.initial_check_performed && r.status == RunStatus::Completed &&
                    r.metrics.violation_count == 0 && final_edge_error(r) < kFinalErrorTol &&
                    e0 > classify_mode(asymmetric_spec()).initial_upper;
    pass = pass && ok;
    lines.push_back(c.name + ": initial check " + (r.initial_check_performed ? "performed" : "skipped") +
                    ", max|e(0)| " + fmt(e0) + ", " + describe(r));
  }
  verdict(pass, "global funnel reproduction", "no initial check, zero violations, max|e(15)| < 0.02");
  for (const auto& l : lines) detail(l);
}

void initial_bounds() {
  const auto [lo, hi] = bounds_at(asymmetric_spec(), 0.0);
  const bool pass = std::abs(lo - kPaperLower) < kBoundTol && std::abs(hi - kPaperUpper) < kBoundTol;
  verdict(pass, "initial bound arithmetic",
          "(" + fmt(lo) + ", " + fmt(hi) + ") vs (-0.25, 0.83), tolerance 5e-3");
}

void lemma1_suite() {
  std::mt19937_64 rng(2024);
  int tree_failures = 0;
  double worst_tree = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kRandomGraphs; ++i) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const SpectralReport r = lemma1_certificate(random_arborescence(n, rng));
    worst_tree = std::min(worst_tree, r.lambda_min);
    if (!(r.lambda_min > kLemmaThreshold)) ++tree_failures;
  }
  double worst_cycle = std::numeric_limits<double>::infinity();
  bool identity = true;
  for (int n = 3; n <= 12; ++n) {
    worst_cycle = std::min(worst_cycle, lemma1_certificate(directed_cycle(n)).lambda_min);
    const IncidenceSet inc = build_incidence(directed_cycle(n));
    identity = identity &&
               (inc.E.transpose() * inc.E_in + inc.E_in.transpose() * inc.E) == inc.E.transpose() * inc.E;
  }
  const bool pass = tree_failures == 0 && worst_cycle > kLemmaThreshold && identity;
  verdict(pass, "Lemma 1 suite", "random directed spanning trees, directed cycles N=3..12, cycle identity");
  detail(std::to_string(kRandomGraphs - tree_failures) + "/" + std::to_string(kRandomGraphs) +
         " random arborescences with lambda_min(L_e_sym) > 1e-9; smallest " + fmt(worst_tree));
  detail("directed cycles: smallest lambda_min(E_t^T E_t) " + fmt(worst_cycle));
  detail(std::string("E^T E_in + E_in^T E = E^T E on all cycles: ") + (identity ? "yes" : "no"));
  if (tree_failures > 0) {
    const SpectralReport fan =
        lemma1_certificate(Topology(6, {{0, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}}, Directedness::Directed));
    detail("counterexample 1->2, 2->{3,4,5,6}: lambda_min(L_e_sym) = " + fmt(fan.lambda_min) +
           " (positivity fails whenever a non-root node has four or more children)");
  }
}

void graph_identities() {
  std::mt19937_64 rng(99);
  int laplacian_mismatch = 0;
  int column_sums = 0;
  double worst_reconstruct = 0.0;
  for (int i = 0; i < kRandomGraphs; ++i) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const Directedness d = i % 2 ? Directedness::Directed : Directedness::Undirected;
    const Topology t = random_connected(n, rng, d);
    const IncidenceSet inc = build_incidence(t);
    if (build_laplacians(inc, d).graph_laplacian != reference_laplacian(t)) ++laplacian_mismatch;
    if ((inc.E.transpose() * Eigen::VectorXi::Ones(n)).cwiseAbs().maxCoeff() != 0) ++column_sums;
    const TreePartition part = tree_partition(t, inc);
    worst_reconstruct = std::max(
        worst_reconstruct, (inc.E.cast<double>() - part.E_t * part.r_input_order()).cwiseAbs().maxCoeff());
  }
  const bool pass = laplacian_mismatch == 0 && column_sums == 0 && worst_reconstruct < kReconstructTol;
  verdict(pass, "graph identities",
          "L = Delta - A mismatches " + std::to_string(laplacian_mismatch) + ", nonzero E^T 1 " +
              std::to_string(column_sums) + ", max |E - E_t R| " + fmt(worst_reconstruct) + " over " +
              std::to_string(kRandomGraphs) + " graphs");
}

// alpha_1 at shifted (e~, t), velocity-free.
Eigen::VectorXd alpha1_at(const GraphModel& g, std::span<const PerformanceSpec> specs, const Eigen::VectorXd& e,
                          double t, double c1) {
  const TransformedState ts = transform_edges(g, specs, e, Eigen::VectorXd::Zero(g.topology.num_nodes()), t);
  return alpha1(g, ts.W, ts.S, c1);
}

double alpha_dot_error_along(const ScenarioConfig& config, double until, int& samples) {
  ClosedLoop loop(config);
  const GraphModel& g = loop.graph();
  const int m = g.topology.num_edges();
  Eigen::VectorXd y = loop.initial_state(config);
  const long steps = std::lround(until / config.dt);
  const long every = std::lround(0.25 / config.dt);
  double worst = 0.0;
  auto rate = [&](double t, const Eigen::VectorXd& s) { return loop.rate(t, s); };
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    if (k % every == 0) {
      const AgentState state = loop.unpack_state(y);
      const Eigen::MatrixXd e = edge_errors(state.x[0], loop.offsets(), g.E);
      for (int a = 0; a < loop.dims(); ++a) {
        const auto specs = config.performance.axis_specs(a, m);
        const Eigen::VectorXd x2 = state.x[1].col(a);
        const Eigen::VectorXd de = g.E.transpose() * x2;
        const double c1 = config.gains.c[0];
        const double h = 1e-6;
        const Eigen::VectorXd fd =
            (alpha1_at(g, specs, e.col(a) + h * de, t + h, c1) - alpha1_at(g, specs, e.col(a) - h * de, t - h, c1)) /
            (2 * h);
        const Eigen::VectorXd analytic = alpha1_dot(g, specs, e.col(a), x2, t, c1);
        worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
        ++samples;
      }
    }
    if (k < steps) y = rk4_step(rate, t, y, config.dt);
  }
  return worst;
}

void mapping_suite(const std::vector<std::pair<Case, ScenarioConfig>>& configs) {
  double worst_round_trip = 0.0;
  for (const auto family : {PerformanceFamily::Rational, PerformanceFamily::Tangent}) {
    const UnifiedPerformanceFunction upf(family);
    for (int i = 0; i <= 20000; ++i) {
      const double e = -10.0 + 1e-3 * i;
      worst_round_trip =
          std::max(worst_round_trip, std::abs(upf.eval(upf.inverse(e)) - e) / std::max(1.0, std::abs(e)));
    }
  }

  double worst_sdot = 0.0;
  for (const PerformanceSpec& spec : {asymmetric_spec(), global_spec()}) {
    for (double t = 0.0; t <= 10.0; t += 0.5) {
      const double beta = envelope(spec, t).beta;
      for (double frac : {-0.25, -0.1, 0.0, 0.2, 0.5, 0.7}) {
        const double e0 = spec.upf.eval(frac * beta);
        for (double v : {-1.0, 0.3, 2.0}) {
          const MappingJacobians j = map_jacobians(spec, e0, t);
          const double h = 1e-6;
          const double fd = (reference_s(spec, e0 + v * h, t + h) - reference_s(spec, e0 - v * h, t - h)) / (2 * h);
          worst_sdot = std::max(worst_sdot, relative_error(j.W * v + j.D, fd));
        }
      }
    }
  }

  int samples = 0;
  double worst_alpha = 0.0;
  for (const auto& [c, config] : configs) {
    worst_alpha = std::max(worst_alpha, alpha_dot_error_along(config, 3.0, samples));
  }

  const bool pass = worst_round_trip <= kRoundTripTol && worst_sdot <= kSdotTol && worst_alpha <= kAlphaDotTol;
  verdict(pass, "mapping suite", "round trip, s' and alpha_1' against finite differences");
  detail("P(P^-1(e)) on [-10, 10], both families: max relative error " + fmt(worst_round_trip));
  detail("s' analytic vs central difference: max relative error " + fmt(worst_sdot));
  detail("alpha_1' analytic vs central difference along the asymmetric trajectories (t <= 3 s, " +
         std::to_string(samples) + " samples): max relative error " + fmt(worst_alpha));
}

void adaptive_lyapunov(const std::vector<std::pair<Case, ScenarioConfig>>& configs,
                       const std::vector<RunResult>& results) {
  bool pass = true;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ScenarioConfig& config = configs[i].second;
    const RunResult& r = results[i];
    const auto t = r.log.series("t");
    const auto V = r.log.series("V");
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
      const double allowed = V[j] + lyapunov_budget(config, t[j], t[j + 1]) + kLyapunovSlack;
      worst_excess = std::max(worst_excess, V[j + 1] - allowed);
    }
    const bool ok = r.status == RunStatus::Completed && std::isfinite(r.metrics.sup_theta_hat_norm) &&
                    r.metrics.sup_theta_hat_norm <= kThetaEnvelope && worst_excess <= 0.0;
    pass = pass && ok;
    lines.push_back(configs[i].first.name + " (dt=" + fmt(config.dt) + "): sup|theta_hat| " +
                    fmt(r.metrics.sup_theta_hat_norm) + " (envelope 10), " + std::to_string(t.size()) +
                    " V samples, worst V(t+) - bound " + fmt(worst_excess));
  }
  verdict(pass, "adaptive and Lyapunov properties",
          "sup|theta_hat| <= |theta_hat(0)| + 10, integrated V inequality at 0.1 s spacing");
  for (const auto& l : lines) detail(l);
}

void rk4_order() {
  auto decay = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
  auto error = [&](int steps) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    for (int k = 0; k < steps; ++k) y = rk4_step(decay, k / double(steps), y, 1.0 / steps);
    return std::abs(y(0) - std::exp(-1.0));
  };
  const double ratio = error(20) / error(40);
  verdict(ratio >= kRk4RatioLo && ratio <= kRk4RatioHi, "RK4 order", "error ratio on halving dt " + fmt(ratio));
}

int spawn(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> csv_header(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cols;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) cols.push_back(item);
  return cols;
}

void cli_contract() {
  const fs::path out = fs::temp_directory_path() / "edgeform_acceptance";
  fs::remove_all(out);
  bool pass = true;
  std::vector<std::string> lines;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(kScenarioDir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const int code = spawn("run " + f.string() + " --out " + out.string());
    const ScenarioConfig config = parse_scenario(f.string());
    const bool header_ok = csv_header(out / (f.stem().string() + ".csv")) ==
                           csv_columns(config.topology.num_nodes(), config.topology.num_edges(), config.dims());
    pass = pass && code == 0 && header_ok;
    lines.push_back(f.stem().string() + ": exit " + std::to_string(code) + ", header " +
                    (header_ok ? "matches" : "MISMATCH"));
  }

  const auto header = csv_header(out / "fig2a_spanning_tree.csv");
  const auto count = [&](const std::string& prefix) {
    return std::count_if(header.begin(), header.end(), [&](const std::string& c) { return c.rfind(prefix, 0) == 0; });
  };
  int error_channels = 0;
  for (const auto& c : header) {
    if (c.rfind("edge", 0) == 0 && (c.ends_with("_ex") || c.ends_with("_ey"))) ++error_channels;
  }
  const bool layout = error_channels == 8 && count("bound_lo_") == 2 && count("bound_hi_") == 2;
  pass = pass && layout;
  lines.push_back("tree CSV: " + std::to_string(error_channels) + " error channels, " +
                  std::to_string(count("bound_")) + " bound channels");

  const std::string tree = (kScenarioDir / "fig2a_spanning_tree.json").string();
  const int perturbed = spawn("run " + tree + " --out " + (out / "perturbed").string() +
                              " --set 'plant.initial.positions.0=[50,50]'");
  const int missing = spawn("run " + (out / "missing.json").string());
  const int bad_key = spawn("run " + tree + " --set sim.nope=1");
  pass = pass && perturbed == 2 && missing == 1 && bad_key == 1;
  lines.push_back("perturbed initial position: exit " + std::to_string(perturbed) + "; missing file: exit " +
                  std::to_string(missing) + "; unknown override: exit " + std::to_string(bad_key));

  verdict(pass, "CLI contract", "bundled scenarios exit 0, perturbed exits 2, CSV schema exact");
  for (const auto& l : lines) detail(l);
}

}  // namespace

int main() {
  std::cout << "edgeform acceptance suite\n";
  asymmetric_reproduction();
  const auto configs = stable_configs();
  std::vector<RunResult> stable_results;
  asymmetric_stable_step(configs, stable_results);
  global_reproduction();
  initial_bounds();
  lemma1_suite();
  graph_identities();
  mapping_suite(configs);
  adaptive_lyapunov(configs, stable_results);
  rk4_order();
  cli_contract();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
