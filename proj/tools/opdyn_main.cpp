#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opdyn/costs.hpp"
#include "opdyn/experiments.hpp"
#include "opdyn/scenario.hpp"
#include "opdyn/trace.hpp"

namespace fs = std::filesystem;
using namespace opdyn;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> horizon;
};

sim::RunOptions make_options(const CommonArgs& common, bool no_adjust, bool no_isolation,
                             const std::string& fusion) {
  sim::RunOptions opts;
  opts.no_adjust = no_adjust;
  opts.no_isolation = no_isolation;
  opts.seed_override = common.seed;
  opts.horizon_override = common.horizon;
  if (fusion == "boomerang")
    opts.fusion_override = sim::FusionMode::boomerang;
  else if (fusion == "averaging")
    opts.fusion_override = sim::FusionMode::averaging;
  else if (!fusion.empty())
    throw InvalidConfig("--fusion must be 'boomerang' or 'averaging'");
  return opts;
}

int cmd_run(const CommonArgs& common, const std::string& out_dir, bool no_adjust,
            bool no_isolation, const std::string& fusion) {
  const auto cfg = sim::ScenarioConfig::from_json_file(common.config);
  const auto opts = make_options(common, no_adjust, no_isolation, fusion);
  fs::create_directories(out_dir);

  sim::SimTrace trace;
  if (cfg.counterfactual) {
    auto result = sim::run_with_counterfactual(cfg, opts);
    trace = std::move(result.actual);
    sim::export_trace(result.baseline, fs::path(out_dir) / "baseline_trace.csv");
    sim::export_bounds(result.bounds, fs::path(out_dir) / "bounds.csv");
  } else {
    trace = sim::run(cfg, opts);
  }
  sim::export_trace(trace, fs::path(out_dir) / "trace.csv");
  sim::export_events(trace, fs::path(out_dir) / "events.csv");
  sim::export_weights(trace, fs::path(out_dir) / "weights.csv");

  const auto report = costs::metrics(trace);
  std::vector<experiments::SweepRow> rows{{no_adjust ? "fixed" : "time-varying", report}};
  const std::string table = experiments::format_metrics_table(rows);
  std::ofstream txt(fs::path(out_dir) / "metrics.txt");
  txt << table;
  experiments::write_metrics_csv(rows, fs::path(out_dir) / "metrics.csv");
  std::cout << table;
  return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& schedules, const std::string& out_dir) {
  const auto cfg = sim::ScenarioConfig::from_json_file(common.config);
  fs::create_directories(out_dir);

  std::vector<std::string> tokens;
  std::string cur;
  for (char c : schedules) {
    if (c == ',') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  if (tokens.empty()) throw InvalidConfig("--schedules must list at least one token");

  std::vector<experiments::SweepRow> rows;
  for (const std::string& token : tokens) {
    auto variant = experiments::make_schedule_variant(cfg, token);
    sim::RunOptions opts;
    opts.no_adjust = !variant.adaptive;
    opts.seed_override = common.seed;
    opts.horizon_override = common.horizon;
    const auto trace = sim::run(variant.config, opts);
    std::string dirname = variant.label;
    for (char& c : dirname)
      if (c == ':') c = '_';
    const fs::path sub = fs::path(out_dir) / dirname;
    fs::create_directories(sub);
    sim::export_trace(trace, sub / "trace.csv");
    sim::export_events(trace, sub / "events.csv");
    sim::export_weights(trace, sub / "weights.csv");
    rows.push_back({variant.label, costs::metrics(trace)});
  }
  const std::string table = experiments::format_metrics_table(rows);
  std::ofstream txt(fs::path(out_dir) / "metrics.txt");
  txt << table;
  experiments::write_metrics_csv(rows, fs::path(out_dir) / "metrics.csv");
  std::cout << table;
  return 0;
}

int cmd_bounds_check(const CommonArgs& common, int trials) {
  const auto cfg = sim::ScenarioConfig::from_json_file(common.config);
  const std::uint64_t seed = common.seed.value_or(cfg.seed);
  const auto summary = experiments::run_bound_trials(trials, seed);
  std::printf("random trials:      %d\n", summary.trials);
  std::printf("violations:         %d\n", summary.violations);
  std::printf("worst spectral margin:   %.6g\n", summary.worst_spectral_margin);
  std::printf("worst separable margin:  %.6g\n", summary.worst_separable_margin);
  std::printf("tightness rel. error:    %.3g\n", summary.worst_tightness_rel_err);

  int scenario_rows = 0;
  int scenario_violations = 0;
  if (cfg.counterfactual) {
    sim::RunOptions opts;
    opts.horizon_override = common.horizon;
    const auto result = sim::run_with_counterfactual(cfg, opts);
    for (const auto& row : result.bounds) {
      ++scenario_rows;
      if (row.additional_cost > row.spectral * (1.0 + 1e-9) + 1e-15 ||
          row.additional_cost > row.separable * (1.0 + 1e-9) + 1e-15)
        ++scenario_violations;
    }
    std::printf("scenario bound rows:     %d\n", scenario_rows);
    std::printf("scenario violations:     %d\n", scenario_violations);
  }
  return (summary.violations == 0 && scenario_violations == 0) ? 0 : 1;
}

int cmd_riccati(const CommonArgs& common, int agent_id) {
  const auto cfg = sim::ScenarioConfig::from_json_file(common.config);
  sim::RunOptions opts;
  opts.seed_override = common.seed;
  const auto scenario = sim::Scenario::build(cfg, opts);
  const sim::AgentState* agent = nullptr;
  for (const auto& a : scenario.agents())
    if (a.id == agent_id) agent = &a;
  if (!agent) throw UnknownAgent("no agent with id " + std::to_string(agent_id));

  const Eigen::IOFormat fmt(Eigen::StreamPrecision, 0, ", ", "\n", "  [", "]");
  std::cout << "agent " << agent->id << " ("
            << (agent->role == sim::Role::malicious ? "malicious" : "normal") << ")\n";
  std::cout << "A =\n" << agent->problem.A.format(fmt) << "\nB =\n"
            << agent->problem.B.format(fmt) << "\nR =\n" << agent->problem.R.format(fmt) << "\n";
  std::cout << "gamma sequence:";
  for (double g : agent->schedule.current) std::cout << ' ' << g;
  std::cout << "\n";
  for (std::size_t t = 0; t < agent->solution.P.size(); ++t) {
    std::cout << "P(" << t + 1 << ") =\n" << agent->solution.P[t].format(fmt) << "\n";
    std::cout << "K(" << t + 1 << ") =\n" << agent->solution.K[t].format(fmt) << "\n";
  }
  std::cout << "residual = " << agent->solution.residual
            << ", sweeps = " << agent->solution.iterations << "\n";
  const auto verdict =
      riccati::check_stability_condition(agent->problem, agent->schedule.current);
  std::cout << "stabilizable = " << (verdict.stabilizable ? "yes" : "no")
            << ", product condition = " << (verdict.product_condition_holds ? "holds" : "fails")
            << " (product " << verdict.product_value << " vs |lambda|_min^2 "
            << verdict.min_eig_sq << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opdyn: cost-aware opinion dynamics simulator"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir;
  bool no_adjust = false;
  bool no_isolation = false;
  std::string fusion;
  std::string schedules;
  int trials = 1000;
  int agent_id = 0;

  auto add_common = [&common](CLI::App* sub, bool with_seed_horizon = true) {
    sub->add_option("--config", common.config, "scenario config (JSON)")->required();
    if (with_seed_horizon) {
      sub->add_option("--seed", common.seed, "override the config seed");
      sub->add_option("--horizon", common.horizon, "override the config horizon");
    }
  };

  CLI::App* run = app.add_subcommand("run", "simulate one scenario and export its trace");
  add_common(run);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--no-adjust", no_adjust, "freeze the evolution-rate schedules");
  run->add_flag("--no-isolation", no_isolation, "freeze trust weights (no decay or cuts)");
  run->add_option("--fusion", fusion, "boomerang|averaging");

  CLI::App* sweep = app.add_subcommand("sweep", "compare metrics across schedule variants");
  add_common(sweep);
  sweep->add_option("--schedules", schedules,
                    "comma list: time-varying, periodN, const:X")->required();
  sweep->add_option("--out", out_dir, "output directory")->required();

  CLI::App* bounds = app.add_subcommand("bounds-check", "verify the deviation-cost bounds");
  add_common(bounds);
  bounds->add_option("--trials", trials, "number of randomized instances");

  CLI::App* ric = app.add_subcommand("riccati", "print P, K, residual, and the stability verdict");
  add_common(ric);
  ric->add_option("--agent", agent_id, "agent id")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(common, out_dir, no_adjust, no_isolation, fusion);
    if (sweep->parsed()) return cmd_sweep(common, schedules, out_dir);
    if (bounds->parsed()) return cmd_bounds_check(common, trials);
    if (ric->parsed()) return cmd_riccati(common, agent_id);
  } catch (const opdyn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
