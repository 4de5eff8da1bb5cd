#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "opdyn/scenario.hpp"

namespace opdyn::sim {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::set<std::string>& allowed, const char* ctx) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw InvalidConfig(std::string("unknown key '") + item.key() + "' in " + ctx);
}

double as_number(const json& j, const char* ctx) {
  if (!j.is_number()) throw InvalidConfig(std::string(ctx) + " must be a number");
  return j.get<double>();
}

long as_integer(const json& j, const char* ctx) {
  if (!j.is_number_integer()) throw InvalidConfig(std::string(ctx) + " must be an integer");
  return j.get<long>();
}

std::vector<double> as_number_list(const json& j, const char* ctx) {
  if (!j.is_array()) throw InvalidConfig(std::string(ctx) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(as_number(v, ctx));
  return out;
}

Eigen::VectorXd as_vector(const json& j, const char* ctx) {
  const auto values = as_number_list(j, ctx);
  Eigen::VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const char* ctx) {
  if (!j.is_array() || j.empty())
    throw InvalidConfig(std::string(ctx) + " must be a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw InvalidConfig(std::string(ctx) + " rows must be non-empty arrays");
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw InvalidConfig(std::string(ctx) + " must be rectangular");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_number(j[r][c], ctx);
  }
  return m;
}

AgentSpec parse_agent(const json& j) {
  if (!j.is_object()) throw InvalidConfig("agent entries must be objects");
  expect_keys(j, {"id", "role", "target", "A", "B", "R", "a_diag_perturb"}, "agents[]");
  if (!j.contains("id") || !j.contains("role"))
    throw InvalidConfig("agent entries require 'id' and 'role'");
  AgentSpec spec;
  spec.id = static_cast<int>(as_integer(j.at("id"), "agent id"));
  const std::string role = j.at("role").get<std::string>();
  if (role == "normal")
    spec.role = Role::normal;
  else if (role == "malicious")
    spec.role = Role::malicious;
  else
    throw InvalidConfig("agent role must be 'normal' or 'malicious'");
  if (j.contains("target")) spec.target = as_vector(j.at("target"), "agent target");
  if (j.contains("A")) spec.A = as_matrix(j.at("A"), "agent A");
  if (j.contains("B")) spec.B = as_matrix(j.at("B"), "agent B");
  if (j.contains("R")) spec.R = as_matrix(j.at("R"), "agent R");
  if (j.contains("a_diag_perturb"))
    spec.a_diag_perturb = as_number(j.at("a_diag_perturb"), "a_diag_perturb");
  return spec;
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config root must be an object");
  expect_keys(j,
              {"agents", "edges", "norm", "isolation", "schedule", "horizon", "seed",
               "fusion_mode", "counterfactual"},
              "config");
  for (const char* key : {"agents", "edges", "norm", "isolation", "schedule"})
    if (!j.contains(key)) throw InvalidConfig(std::string("config requires '") + key + "'");

  ScenarioConfig cfg;
  if (!j.at("agents").is_array()) throw InvalidConfig("'agents' must be an array");
  for (const auto& a : j.at("agents")) cfg.agents.push_back(parse_agent(a));

  if (!j.at("edges").is_array()) throw InvalidConfig("'edges' must be an array");
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw InvalidConfig("edges must be [i, j] pairs");
    cfg.edges.emplace_back(static_cast<int>(as_integer(e[0], "edge endpoint")),
                           static_cast<int>(as_integer(e[1], "edge endpoint")));
  }

  const json& norm = j.at("norm");
  expect_keys(norm, {"eta", "r"}, "norm");
  if (!norm.contains("eta") || !norm.contains("r"))
    throw InvalidConfig("norm requires 'eta' and 'r'");
  cfg.norm.eta = as_vector(norm.at("eta"), "norm.eta");
  cfg.norm.r = as_number(norm.at("r"), "norm.r");

  const json& iso = j.at("isolation");
  expect_keys(iso, {"rho", "cut_threshold"}, "isolation");
  if (!iso.contains("rho") || !iso.contains("cut_threshold"))
    throw InvalidConfig("isolation requires 'rho' and 'cut_threshold'");
  cfg.isolation.rho = as_number(iso.at("rho"), "isolation.rho");
  cfg.isolation.cut_threshold = as_number(iso.at("cut_threshold"), "isolation.cut_threshold");

  const json& sch = j.at("schedule");
  expect_keys(sch,
              {"T", "levels", "initial", "lower", "upper", "lambda", "beta", "delta",
               "malicious_gamma"},
              "schedule");
  for (const char* key : {"T", "levels", "initial", "lower", "upper", "lambda", "beta", "delta"})
    if (!sch.contains(key)) throw InvalidConfig(std::string("schedule requires '") + key + "'");
  cfg.schedule.T = static_cast<int>(as_integer(sch.at("T"), "schedule.T"));
  cfg.schedule.levels = as_number_list(sch.at("levels"), "schedule.levels");
  cfg.schedule.initial = as_number_list(sch.at("initial"), "schedule.initial");
  cfg.schedule.lower = as_number_list(sch.at("lower"), "schedule.lower");
  cfg.schedule.upper = as_number_list(sch.at("upper"), "schedule.upper");
  cfg.schedule.lambda = as_number(sch.at("lambda"), "schedule.lambda");
  cfg.schedule.beta = as_number(sch.at("beta"), "schedule.beta");
  cfg.schedule.delta = as_number(sch.at("delta"), "schedule.delta");
  if (sch.contains("malicious_gamma"))
    cfg.schedule.malicious_gamma = as_number(sch.at("malicious_gamma"), "malicious_gamma");

  if (j.contains("horizon")) cfg.horizon = as_integer(j.at("horizon"), "horizon");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw InvalidConfig("seed must be a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("fusion_mode")) {
    const std::string mode = j.at("fusion_mode").get<std::string>();
    if (mode == "boomerang")
      cfg.fusion_mode = FusionMode::boomerang;
    else if (mode == "averaging")
      cfg.fusion_mode = FusionMode::averaging;
    else
      throw InvalidConfig("fusion_mode must be 'boomerang' or 'averaging'");
  }
  if (j.contains("counterfactual")) {
    const json& cf = j.at("counterfactual");
    expect_keys(cf, {"reference"}, "counterfactual");
    if (!cf.contains("reference")) throw InvalidConfig("counterfactual requires 'reference'");
    CounterfactualSpec spec;
    if (cf.at("reference").is_string()) {
      if (cf.at("reference").get<std::string>() != "eta")
        throw InvalidConfig("counterfactual.reference must be 'eta' or a vector");
    } else {
      spec.reference = as_vector(cf.at("reference"), "counterfactual.reference");
    }
    cfg.counterfactual = spec;
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

}  // namespace opdyn::sim
