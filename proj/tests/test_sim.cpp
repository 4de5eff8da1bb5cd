#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "opdyn/costs.hpp"
#include "opdyn/scenario.hpp"
#include "opdyn/trace.hpp"
#include "test_support.hpp"

using namespace opdyn;
using namespace opdyn::testing;
namespace fs = std::filesystem;

namespace {

sim::ScenarioConfig reference_config() {
  return sim::ScenarioConfig::from_json_file(config_path("reference.json"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "opdyn_test_out";
  fs::create_directories(dir);
  return dir;
}

std::optional<long> event_step(const sim::SimTrace& tr, const std::string& type) {
  for (const auto& e : tr.events)
    if (e.type == type) return e.k;
  return std::nullopt;
}

}  // namespace

TEST_CASE("reference scenario builds with the published neighbor sets") {
  const auto scenario = sim::Scenario::build(reference_config());
  REQUIRE(scenario.agents().size() == 10);
  const auto& net = scenario.network();
  // index i corresponds to agent id i+1
  CHECK(net.neighbors(0) == std::vector<int>{1, 2, 3, 4, 5, 9});
  CHECK(net.active_malicious_neighbors(0) == std::vector<int>{4, 5, 9});
  CHECK(net.active_malicious_neighbors(2) == std::vector<int>{6, 7, 9});
  for (const auto& a : scenario.agents()) {
    const bool inside = (a.x_target - Eigen::VectorXd::Constant(3, 3.0)).norm() <= 0.5;
    CHECK(inside == (a.role == sim::Role::normal));
    CHECK(a.x.isZero());
    for (const auto& P : a.solution.P) CHECK(riccati::is_positive_definite(P));
  }
}

TEST_CASE("a schedule of tiny rates violates the existence condition") {
  auto cfg = reference_config();
  cfg.schedule.initial.assign(7, 0.0029);
  cfg.schedule.levels = {0.0029};
  cfg.schedule.lower.assign(7, 0.0029);
  cfg.schedule.upper.assign(7, 0.0029);
  cfg.schedule.malicious_gamma = 0.0029;
  CHECK_THROWS_AS(sim::Scenario::build(cfg), ConditionViolated);
}

TEST_CASE("two-agent toy scenario is valid and steps as the closed form predicts") {
  const auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
  auto scenario = sim::Scenario::build(cfg);
  REQUIRE(scenario.agents().size() == 2);

  SUBCASE("an isolated agent at the origin takes the scalar first step") {
    // strip the edge so the normal agent has no neighbors; x^f = x = 0,
    // u(0) = -K (0 - 0.2) and x(1) = 0.19 * 0.2 with the gamma = 0.19 gain
    auto lone = cfg;
    lone.edges.clear();
    auto s = sim::Scenario::build(lone);
    s.step();
    const auto& normal = s.agents()[0];
    CHECK(normal.x(0) == doctest::Approx(0.19 * 0.2).epsilon(1e-9));
  }
}

TEST_CASE("an agent at its target with no neighbors stays put") {
  auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
  cfg.edges.clear();
  cfg.agents[0].target = Eigen::VectorXd::Zero(1);  // at the initial opinion
  auto scenario = sim::Scenario::build(cfg);
  scenario.step();
  // zero deviation: u = 0 and the deviation dynamics hold the fixed point
  CHECK(scenario.agents()[0].x(0) == 0.0);
  CHECK(scenario.agents()[0].u(0) == 0.0);
}

TEST_CASE("cutting the last malicious link clears the flag at the next boundary") {
  auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
  cfg.isolation.rho = 0.5;
  cfg.isolation.cut_threshold = 0.3;  // cut happens quickly
  cfg.horizon = 10;
  auto scenario = sim::Scenario::build(cfg);
  scenario.run_to_horizon();
  const auto& tr = scenario.trace();
  const auto iso = event_step(tr, "isolation-complete");
  REQUIRE(iso.has_value());
  CHECK(*iso == 2);  // 1.0 -> 0.5 (kept) -> 0.25 (cut)
  // after isolation the schedule climbs: 0.19 was the start, so the first
  // post-isolation boundary saturates at the ceiling
  bool saw_saturation = false;
  for (const auto& e : tr.events)
    if (e.type == "schedule-saturated" && e.k > *iso) saw_saturation = true;
  CHECK(saw_saturation);
}

TEST_CASE("run produces horizon records and is deterministic") {
  auto cfg = reference_config();
  cfg.horizon = 10;
  const auto t1 = sim::run(cfg);
  CHECK(t1.steps.size() == 10);
  for (std::size_t s = 0; s < t1.steps.size(); ++s) {
    CHECK(t1.steps[s].k == static_cast<long>(s + 1));
    CHECK(t1.steps[s].agents.size() == 10);
  }
  long prev_event = 0;
  for (const auto& e : t1.events) {
    CHECK(e.k >= prev_event);
    prev_event = e.k;
  }

  const auto t2 = sim::run(cfg);
  const auto dir = temp_dir();
  sim::export_trace(t1, dir / "det_a.csv");
  sim::export_trace(t2, dir / "det_b.csv");
  CHECK(slurp(dir / "det_a.csv") == slurp(dir / "det_b.csv"));
}

TEST_CASE("roster order does not change the trace") {
  auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
  // make the build seed-free so the draw order cannot differ
  cfg.agents[0].a_diag_perturb = 0.0;
  cfg.agents[1].a_diag_perturb = 0.0;
  REQUIRE(cfg.agents[0].target.has_value());
  REQUIRE(cfg.agents[1].target.has_value());
  cfg.horizon = 15;

  auto swapped = cfg;
  std::swap(swapped.agents[0], swapped.agents[1]);
  // the template lives on the first entry; carry it across the swap
  swapped.agents[0].A = cfg.agents[0].A;
  swapped.agents[0].B = cfg.agents[0].B;
  swapped.agents[0].R = cfg.agents[0].R;

  const auto dir = temp_dir();
  sim::export_trace(sim::run(cfg), dir / "roster_a.csv");
  sim::export_trace(sim::run(swapped), dir / "roster_b.csv");
  CHECK(slurp(dir / "roster_a.csv") == slurp(dir / "roster_b.csv"));
}

TEST_CASE("reference run isolates before it converges") {
  const auto cfg = reference_config();
  const auto tr = sim::run(cfg);
  const auto iso = event_step(tr, "isolation-complete");
  const auto conv = event_step(tr, "convergence");
  REQUIRE(iso.has_value());
  REQUIRE(conv.has_value());
  CHECK(*iso < *conv);
  // convergence is sustained to the end of the horizon
  const auto rep = costs::metrics(tr);
  REQUIRE(rep.convergence_step.has_value());
  for (const auto& step : tr.steps) {
    if (step.k < *rep.convergence_step) continue;
    for (const auto& a : step.agents)
      if (!a.malicious_role) CHECK(a.dist_to_target <= 0.05 + 1e-12);
  }
}

TEST_CASE("counterfactual twin") {
  SUBCASE("zero malicious agents: baseline is bit-identical, deviations are zero") {
    const auto cfg = sim::ScenarioConfig::from_json_file(config_path("no_malicious.json"));
    const auto result = sim::run_with_counterfactual(cfg);
    const auto dir = temp_dir();
    sim::export_trace(result.actual, dir / "cf_actual.csv");
    sim::export_trace(result.baseline, dir / "cf_baseline.csv");
    CHECK(slurp(dir / "cf_actual.csv") == slurp(dir / "cf_baseline.csv"));
    CHECK(result.bounds.empty());
  }
  SUBCASE("reference scenario: every deviation cost honors both bounds") {
    auto cfg = reference_config();
    cfg.horizon = 60;
    const auto result = sim::run_with_counterfactual(cfg);
    CHECK_FALSE(result.bounds.empty());
    for (const auto& row : result.bounds) {
      CHECK(row.additional_cost <= row.spectral * (1.0 + 1e-9) + 1e-15);
      CHECK(row.additional_cost <= row.separable * (1.0 + 1e-9) + 1e-15);
    }
  }
  SUBCASE("scalar toy meets the spectral bound with near equality") {
    const auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
    const auto result = sim::run_with_counterfactual(cfg);
    CHECK_FALSE(result.bounds.empty());
    for (const auto& row : result.bounds) {
      if (row.spectral == 0.0) continue;
      CHECK(row.additional_cost == doctest::Approx(row.spectral).epsilon(1e-9));
    }
  }
  SUBCASE("missing counterfactual spec is rejected") {
    auto cfg = reference_config();
    cfg.counterfactual.reset();
    CHECK_THROWS_AS(sim::run_with_counterfactual(cfg), InvalidConfig);
  }
}

TEST_CASE("averaging fusion mode runs and stays bounded without malice") {
  auto cfg = sim::ScenarioConfig::from_json_file(config_path("no_malicious.json"));
  cfg.counterfactual.reset();
  sim::RunOptions opts;
  opts.fusion_override = sim::FusionMode::averaging;
  opts.horizon_override = 40;
  const auto tr = sim::run(cfg, opts);
  for (const auto& step : tr.steps)
    for (const auto& a : step.agents) CHECK(a.x.cwiseAbs().maxCoeff() < 10.0);
}

TEST_CASE("trace export") {
  const auto dir = temp_dir();
  SUBCASE("round trip preserves every recorded value") {
    auto cfg = reference_config();
    cfg.horizon = 7;
    const auto tr = sim::run(cfg);
    sim::export_trace(tr, dir / "roundtrip.csv");
    const auto back = sim::read_trace(dir / "roundtrip.csv");
    REQUIRE(back.steps.size() == tr.steps.size());
    CHECK(back.n == tr.n);
    CHECK(back.m == tr.m);
    for (std::size_t s = 0; s < tr.steps.size(); ++s) {
      REQUIRE(back.steps[s].agents.size() == tr.steps[s].agents.size());
      for (std::size_t a = 0; a < tr.steps[s].agents.size(); ++a) {
        const auto& lhs = tr.steps[s].agents[a];
        const auto& rhs = back.steps[s].agents[a];
        CHECK(lhs.agent_id == rhs.agent_id);
        CHECK(lhs.x == rhs.x);
        CHECK(lhs.u == rhs.u);
        CHECK(lhs.step_cost == rhs.step_cost);
        CHECK(lhs.discounted_cost == rhs.discounted_cost);
        CHECK(lhs.dist_to_target == rhs.dist_to_target);
        CHECK(lhs.gamma == rhs.gamma);
        CHECK(lhs.active_malicious_links == rhs.active_malicious_links);
      }
    }
  }
  SUBCASE("empty trace writes a header-only file") {
    sim::SimTrace empty;
    empty.n = 3;
    empty.m = 2;
    sim::export_trace(empty, dir / "empty.csv");
    const std::string text = slurp(dir / "empty.csv");
    CHECK(text ==
          "k,agent_id,role,x_1,x_2,x_3,u_1,u_2,step_cost,discounted_cost,dist_to_target,gamma,"
          "active_malicious_links\n");
  }
}

TEST_CASE("config parsing rejects unknown or malformed keys") {
  const std::string good = slurp(config_path("toy_scalar.json"));
  CHECK_NOTHROW(sim::ScenarioConfig::from_json_text(good));

  SUBCASE("unknown top-level key") {
    std::string bad = good;
    bad.insert(bad.rfind('}'), ", \"extra\": 1");
    CHECK_THROWS_AS(sim::ScenarioConfig::from_json_text(bad), InvalidConfig);
  }
  SUBCASE("unknown nested key") {
    std::string bad = good;
    const auto pos = bad.find("\"norm\": {");
    REQUIRE(pos != std::string::npos);
    bad.insert(pos + 9, "\"color\": 3, ");
    CHECK_THROWS_AS(sim::ScenarioConfig::from_json_text(bad), InvalidConfig);
  }
  SUBCASE("not JSON at all") {
    CHECK_THROWS_AS(sim::ScenarioConfig::from_json_text("not json"), InvalidConfig);
  }
  SUBCASE("missing required section") {
    CHECK_THROWS_AS(sim::ScenarioConfig::from_json_text("{\"agents\": []}"), InvalidConfig);
  }
}

TEST_CASE("role and target consistency are enforced") {
  auto cfg = sim::ScenarioConfig::from_json_file(config_path("toy_scalar.json"));
  SUBCASE("normal target outside the norm region") {
    cfg.agents[0].target = Eigen::VectorXd::Constant(1, 5.0);
    CHECK_THROWS_AS(sim::Scenario::build(cfg), InvalidConfig);
  }
  SUBCASE("malicious target inside the norm region") {
    cfg.agents[1].target = Eigen::VectorXd::Constant(1, 0.1);
    CHECK_THROWS_AS(sim::Scenario::build(cfg), InvalidConfig);
  }
  SUBCASE("edge referencing a missing agent") {
    cfg.edges.push_back({1, 99});
    CHECK_THROWS_AS(sim::Scenario::build(cfg), InvalidConfig);
  }
}
