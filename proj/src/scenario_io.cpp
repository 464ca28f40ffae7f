#include "edgeform/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace edgeform {

namespace {

using nlohmann::json;

const char* const kAxisNames[] = {"x", "y", "z"};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError(where + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) fail(where, "unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, "missing required key '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : as_number(*it, where + "." + key);
}

std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return as_number(*it, where + "." + key);
}

Eigen::MatrixXd as_matrix(const json& v, int rows, int cols, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    fail(where, "expected an array of " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    const std::string rw = where + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      fail(rw, "expected " + std::to_string(cols) + " values");
    }
    for (int c = 0; c < cols; ++c) out(r, c) = as_number(row[static_cast<std::size_t>(c)], rw);
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Topology topology_from_json(const json& obj) {
  const std::string where = "topology";
  check_keys(obj, {"nodes", "directed", "edges"}, where);
  const int nodes = as_int(require(obj, "nodes", where), where + ".nodes");
  const json& directed = require(obj, "directed", where);
  if (!directed.is_boolean()) fail(where + ".directed", "expected true or false");
  const json& edges = require(obj, "edges", where);
  if (!edges.is_array()) fail(where + ".edges", "expected an array of [tail, head] pairs");
  std::vector<Edge> list;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string ew = where + ".edges[" + std::to_string(k) + "]";
    if (!edges[k].is_array() || edges[k].size() != 2) fail(ew, "expected [tail, head]");
    list.push_back(Edge{as_int(edges[k][0], ew) - 1, as_int(edges[k][1], ew) - 1});
  }
  try {
    return Topology(nodes, std::move(list), directed.get<bool>() ? Directedness::Directed : Directedness::Undirected);
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

namespace {

PerformanceFamily parse_family(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected \"rational\" or \"tangent\"");
  try {
    return performance_family_from_string(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

PerformanceSettings parse_performance(const json& obj) {
  const std::string where = "performance";
  check_keys(obj, {"family", "delta_lo", "delta_hi", "beta0", "betaf", "lambda", "overrides"}, where);
  PerformanceSettings settings;
  PerformanceSpec& spec = settings.shared;
  if (obj.contains("family")) spec.upf = UnifiedPerformanceFunction(parse_family(obj["family"], where + ".family"));
  spec.delta_lo = as_number(require(obj, "delta_lo", where), where + ".delta_lo");
  spec.delta_hi = as_number(require(obj, "delta_hi", where), where + ".delta_hi");
  spec.beta0 = as_number(require(obj, "beta0", where), where + ".beta0");
  spec.betaf = as_number(require(obj, "betaf", where), where + ".betaf");
  spec.lambda = as_number(require(obj, "lambda", where), where + ".lambda");
  if (const auto it = obj.find("overrides"); it != obj.end()) {
    if (!it->is_array()) fail(where + ".overrides", "expected an array");
    for (std::size_t j = 0; j < it->size(); ++j) {
      const json& o = (*it)[j];
      const std::string ow = where + ".overrides[" + std::to_string(j) + "]";
      check_keys(o, {"edge", "axis", "family", "delta_lo", "delta_hi", "beta0", "betaf", "lambda"}, ow);
      PerformanceOverride po;
      if (o.contains("edge")) po.edge = as_int(o["edge"], ow + ".edge") - 1;
      if (o.contains("axis")) po.axis = as_int(o["axis"], ow + ".axis") - 1;
      if (o.contains("family")) po.family = parse_family(o["family"], ow + ".family");
      po.delta_lo = optional_number(o, "delta_lo", ow);
      po.delta_hi = optional_number(o, "delta_hi", ow);
      po.beta0 = optional_number(o, "beta0", ow);
      po.betaf = optional_number(o, "betaf", ow);
      po.lambda = optional_number(o, "lambda", ow);
      settings.overrides.push_back(po);
    }
  }
  return settings;
}

json performance_to_json(const PerformanceSettings& settings) {
  const PerformanceSpec& s = settings.shared;
  json out{{"family", to_string(s.upf.family())},
           {"delta_lo", s.delta_lo},
           {"delta_hi", s.delta_hi},
           {"beta0", s.beta0},
           {"betaf", s.betaf},
           {"lambda", s.lambda}};
  if (!settings.overrides.empty()) {
    json list = json::array();
    for (const auto& o : settings.overrides) {
      json item = json::object();
      if (o.edge) item["edge"] = *o.edge + 1;
      if (o.axis) item["axis"] = *o.axis + 1;
      if (o.family) item["family"] = to_string(*o.family);
      if (o.delta_lo) item["delta_lo"] = *o.delta_lo;
      if (o.delta_hi) item["delta_hi"] = *o.delta_hi;
      if (o.beta0) item["beta0"] = *o.beta0;
      if (o.betaf) item["betaf"] = *o.betaf;
      if (o.lambda) item["lambda"] = *o.lambda;
      list.push_back(std::move(item));
    }
    out["overrides"] = std::move(list);
  }
  return out;
}

std::vector<double> number_list(const json& v, std::size_t broadcast, const std::string& where) {
  if (v.is_number()) return std::vector<double>(broadcast, v.get<double>());
  if (!v.is_array()) fail(where, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t j = 0; j < v.size(); ++j) out.push_back(as_number(v[j], where + "[" + std::to_string(j) + "]"));
  return out;
}

void parse_gains(const json& obj, int num_agents, ScenarioConfig& config) {
  const std::string where = "gains";
  check_keys(obj, {"c", "gamma", "vartheta", "epsilon"}, where);
  const json& c = require(obj, "c", where);
  if (!c.is_array()) fail(where + ".c", "expected an array [c1, ..., cn]");
  config.gains.c = number_list(c, 0, where + ".c");
  config.gains.gamma =
      number_list(require(obj, "gamma", where), static_cast<std::size_t>(num_agents), where + ".gamma");
  config.diagnostics.vartheta = optional_number(obj, "vartheta", where);
  config.diagnostics.epsilon = number_or(obj, "epsilon", 1e-3, where);
}

void parse_plant(const json& obj, ScenarioConfig& config) {
  const std::string where = "plant";
  check_keys(obj, {"order", "dims", "friction", "theta", "initial", "formation"}, where);
  const int N = config.topology.num_nodes();
  const int order = as_int(require(obj, "order", where), where + ".order");
  const int dims = as_int(require(obj, "dims", where), where + ".dims");
  if (order < 1) fail(where + ".order", "must be at least 1");
  if (dims < 1 || dims > 3) fail(where + ".dims", "must be 1, 2 or 3");

  if (const auto it = obj.find("friction"); it != obj.end()) {
    const std::string fw = where + ".friction";
    check_keys(*it, {"model", "k1", "k2"}, fw);
    const json& model = require(*it, "model", fw);
    if (model == "none") {
      config.friction.kind = FrictionModel::Kind::None;
    } else if (model == "tanh_pair") {
      config.friction.kind = FrictionModel::Kind::TanhPair;
    } else {
      fail(fw + ".model", "expected \"none\" or \"tanh_pair\"");
    }
    config.friction.k1 = number_or(*it, "k1", 10.0, fw);
    config.friction.k2 = number_or(*it, "k2", 100.0, fw);
  }

  const json& theta = require(obj, "theta", where);
  if (theta.is_array() && !theta.empty() && theta[0].is_number()) {
    // one row shared by every agent
    const Eigen::MatrixXd row = as_matrix(json::array({theta}), 1, dims, where + ".theta");
    config.theta = row.replicate(N, 1);
  } else {
    config.theta = as_matrix(theta, N, dims, where + ".theta");
  }

  const json& initial = require(obj, "initial", where);
  const std::string iw = where + ".initial";
  check_keys(initial, {"positions", "velocities"}, iw);
  config.initial = AgentState(N, order, dims);
  config.initial.x[0] = as_matrix(require(initial, "positions", iw), N, dims, iw + ".positions");
  if (initial.contains("velocities")) {
    if (order < 2) fail(iw + ".velocities", "first-order agents have no velocity state");
    config.initial.x[1] = as_matrix(initial["velocities"], N, dims, iw + ".velocities");
  }

  const json& formation = require(obj, "formation", where);
  const std::string tw = where + ".formation";
  check_keys(formation, {"positions", "offsets", "regular_polygon"}, tw);
  if (formation.size() != 1) fail(tw, "give exactly one of positions, offsets or regular_polygon");
  config.target = FormationTarget{};
  if (formation.contains("positions")) {
    config.target.positions = as_matrix(formation["positions"], N, dims, tw + ".positions");
  } else if (formation.contains("offsets")) {
    config.target.offsets = as_matrix(formation["offsets"], config.topology.num_edges(), dims, tw + ".offsets");
  } else {
    const int count = as_int(formation["regular_polygon"], tw + ".regular_polygon");
    if (count != N || dims != 2) fail(tw + ".regular_polygon", "needs one vertex per agent and dims = 2");
    config.target.positions = regular_polygon(N);
  }
}

void parse_sim(const json& obj, ScenarioConfig& config) {
  const std::string where = "sim";
  check_keys(obj, {"dt", "horizon", "seed", "log_stride", "settle_tol"}, where);
  config.dt = number_or(obj, "dt", 1e-3, where);
  config.horizon = number_or(obj, "horizon", 15.0, where);
  if (obj.contains("seed")) {
    if (!obj["seed"].is_number_unsigned()) fail(where + ".seed", "expected a non-negative integer");
    config.seed = obj["seed"].get<std::uint64_t>();
  }
  if (obj.contains("log_stride")) config.log_stride = as_int(obj["log_stride"], where + ".log_stride");
  config.settle_tol = number_or(obj, "settle_tol", 0.02, where);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '.')) parts.push_back(item);
  return parts;
}

double json_number(double v) {
  // JSON has no infinity; bounds are finite in metrics so this is only a guard
  return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ScenarioConfig scenario_from_json(const json& doc) {
  check_keys(doc, {"name", "topology", "performance", "gains", "plant", "sim"}, "scenario");
  ScenarioConfig config;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("scenario.name", "expected a string");
    config.name = doc["name"].get<std::string>();
  }
  config.topology = topology_from_json(require(doc, "topology", "scenario"));
  config.performance = parse_performance(require(doc, "performance", "scenario"));
  parse_gains(require(doc, "gains", "scenario"), config.topology.num_nodes(), config);
  parse_plant(require(doc, "plant", "scenario"), config);
  if (doc.contains("sim")) parse_sim(doc["sim"], config);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("invalid scenario: ") + e.what());
  }
  return config;
}

json scenario_to_json(const ScenarioConfig& config) {
  json edges = json::array();
  for (const Edge& e : config.topology.edges()) edges.push_back({e.tail + 1, e.head + 1});
  json gains{{"c", config.gains.c}, {"gamma", config.gains.gamma}, {"epsilon", config.diagnostics.epsilon}};
  if (config.diagnostics.vartheta) gains["vartheta"] = *config.diagnostics.vartheta;

  json initial{{"positions", matrix_to_json(config.initial.x[0])}};
  if (config.order() >= 2) initial["velocities"] = matrix_to_json(config.initial.x[1]);
  json formation = config.target.positions.size() > 0 ? json{{"positions", matrix_to_json(config.target.positions)}}
                                                      : json{{"offsets", matrix_to_json(config.target.offsets)}};
  json friction{{"model", config.friction.kind == FrictionModel::Kind::None ? "none" : "tanh_pair"},
                {"k1", config.friction.k1},
                {"k2", config.friction.k2}};

  return json{{"name", config.name},
              {"topology", {{"nodes", config.topology.num_nodes()}, {"directed", config.topology.directed()},
                            {"edges", edges}}},
              {"performance", performance_to_json(config.performance)},
              {"gains", gains},
              {"plant", {{"order", config.order()},
                         {"dims", config.dims()},
                         {"friction", friction},
                         {"theta", matrix_to_json(config.theta)},
                         {"initial", initial},
                         {"formation", formation}}},
              {"sim", {{"dt", config.dt},
                       {"horizon", config.horizon},
                       {"seed", config.seed},
                       {"log_stride", config.log_stride},
                       {"settle_tol", config.settle_tol}}}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  json value;
  try {
    value = json::parse(assignment.substr(eq + 1));
  } catch (const json::parse_error&) {
    value = assignment.substr(eq + 1);  // bare words are strings
  }
  json* node = &doc;
  for (const std::string& part : split_path(key)) {
    if (node->is_object()) {
      const auto it = node->find(part);
      if (it == node->end()) throw ScenarioError("override key '" + key + "' does not exist in the scenario");
      node = &*it;
    } else if (node->is_array()) {
      std::size_t index = 0;
      try {
        std::size_t used = 0;
        index = std::stoul(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ScenarioError("override key '" + key + "': '" + part + "' is not an array index");
      }
      if (index >= node->size()) throw ScenarioError("override key '" + key + "': index out of range");
      node = &(*node)[index];
    } else {
      throw ScenarioError("override key '" + key + "' does not exist in the scenario");
    }
  }
  *node = std::move(value);
}

ScenarioConfig parse_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = load_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return scenario_from_json(doc);
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

void write_csv(const TrajectoryLog& log, std::ostream& out) {
  for (std::size_t c = 0; c < log.columns.size(); ++c) {
    out << (c ? "," : "") << log.columns[c];
  }
  out << '\n';
  const auto old_precision = out.precision(9);
  for (const auto& row : log.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << row[c];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

json metrics_to_json(const ScenarioConfig& config, const RunResult& result) {
  const Metrics& m = result.metrics;
  json violations = json::array();
  for (const auto& v : result.violations) {
    violations.push_back({{"edge", v.edge + 1},
                          {"axis", kAxisNames[v.axis]},
                          {"time", v.time},
                          {"e_tilde", json_number(v.e_tilde)},
                          {"zeta", json_number(v.zeta)}});
  }
  return json{{"name", config.name},
              {"status", to_string(result.status)},
              {"initial_check_performed", result.initial_check_performed},
              {"violations", violations},
              {"violation_count", m.violation_count},
              {"max_abs_error_final_window", m.max_abs_error_final_window},
              {"final_max_abs_error", m.final_max_abs_error},
              {"settling_time", m.settling_time ? json(*m.settling_time) : json(nullptr)},
              {"settle_tol", config.settle_tol},
              {"sup_theta_hat_norm", m.sup_theta_hat_norm},
              {"gain_check_failures", m.gain_check_failures},
              {"min_c1_dprime", json_number(m.min_c1_dprime)},
              {"end_time", m.end_time},
              {"steps", m.steps},
              {"dt", config.dt},
              {"runtime_seconds", m.runtime_seconds}};
}

}  // namespace edgeform
