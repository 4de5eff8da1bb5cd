#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opdyn/costs.hpp"
#include "opdyn/errors.hpp"
#include "opdyn/fusion.hpp"
#include "opdyn/network.hpp"
#include "opdyn/riccati.hpp"
#include "opdyn/scheduler.hpp"
#include "opdyn/trace.hpp"

namespace opdyn::sim {

enum class Role { normal, malicious };
enum class FusionMode { boomerang, averaging };

/// One roster entry. A, B, R may be omitted on all but the first entry, which
/// then acts as the shared template. a_diag_perturb adds one seeded uniform
/// [0, a_diag_perturb] draw to every diagonal entry of A at build time.
struct AgentSpec {
  int id = -1;
  Role role = Role::normal;
  std::optional<Eigen::VectorXd> target;  ///< generated near +/-eta when absent
  std::optional<Eigen::MatrixXd> A, B, R;
  double a_diag_perturb = 0.0;
};

struct ScheduleSpec {
  int T = 1;
  std::vector<double> levels;
  std::vector<double> initial;
  std::vector<double> lower;
  std::vector<double> upper;
  double lambda = 1.0;
  double beta = 0.0;
  double delta = 0.1;
  double malicious_gamma = 0.15;  ///< fixed rate used by malicious agents
};

struct CounterfactualSpec {
  /// Reference opinion substituted for malicious neighbors; the norm center
  /// when absent.
  std::optional<Eigen::VectorXd> reference;
};

struct ScenarioConfig {
  std::vector<AgentSpec> agents;
  std::vector<std::pair<int, int>> edges;  ///< undirected, by agent id
  fusion::SocialNorm norm;
  net::IsolationPolicy isolation;
  ScheduleSpec schedule;
  long horizon = 120;
  std::uint64_t seed = 0;
  FusionMode fusion_mode = FusionMode::boomerang;
  std::optional<CounterfactualSpec> counterfactual;

  /// Parses the JSON config document. Unknown keys anywhere are rejected.
  static ScenarioConfig from_json_file(const std::filesystem::path& path);
  static ScenarioConfig from_json_text(const std::string& text);
};

struct RunOptions {
  bool no_adjust = false;     ///< freeze schedules (skip period boundaries)
  bool no_isolation = false;  ///< freeze trust weights (skip decay and cutting)
  std::optional<FusionMode> fusion_override;
  std::optional<long> horizon_override;
  std::optional<std::uint64_t> seed_override;
};

struct AgentState {
  int id = -1;
  Role role = Role::normal;
  Eigen::VectorXd x;         ///< opinion, starts at zero
  Eigen::VectorXd x_target;  ///< expected opinion
  riccati::DiscountedLQRProblem problem;
  sched::GammaSchedule schedule;
  riccati::RiccatiSolution solution;
  Eigen::VectorXd u;  ///< input computed at the current step
};

/// A built scenario: the synchronous simulation state plus the trace being
/// recorded. When the config carries a counterfactual spec, a baseline twin
/// trajectory advances in lockstep, sharing the network and schedules, with
/// malicious opinions replaced by their references at fusion time.
class Scenario {
 public:
  /// Validates the config, applies the seeded A-perturbations, generates
  /// missing targets, solves every agent's initial Riccati fixed point, and
  /// verifies stabilizability plus the existence condition per agent.
  /// Deterministic given (config, seed).
  static Scenario build(const ScenarioConfig& config, const RunOptions& opts = {});

  /// Advances the synchronous loop one step: fuse -> control -> dynamics from
  /// the current snapshot, then weight decay/cuts, then (at k mod T == 0)
  /// period-boundary schedule updates with Riccati re-solves for changed
  /// schedules; finally records step k+1.
  void step();

  long now() const { return k_; }
  long horizon() const { return horizon_; }
  int opinion_dim() const { return n_; }

  const std::vector<AgentState>& agents() const { return agents_; }
  const net::AgentNetwork& network() const { return network_; }
  const SimTrace& trace() const { return trace_; }
  bool has_baseline() const { return twin_; }
  const SimTrace& baseline_trace() const;

  /// Per-step deviation-cost checks recorded on the actual trajectory.
  struct BoundRow {
    long k = 0;
    int agent = -1;
    double additional_cost = 0.0;
    double spectral = 0.0;
    double separable = 0.0;
    double delta_total = 0.0;
    int malicious_neighbors = 0;
  };
  const std::vector<BoundRow>& bound_rows() const { return bounds_; }

  /// Runs to the horizon and finalizes the event stream.
  void run_to_horizon();

 private:
  Scenario() = default;

  void record_step();
  void push_event(long k, std::string type, std::string detail);
  Eigen::VectorXd fused_opinion(int idx, bool baseline) const;
  void finalize_events();

  // immutable after build
  fusion::SocialNorm norm_;
  net::IsolationPolicy policy_;
  sched::AdjustParams adjust_;
  FusionMode mode_ = FusionMode::boomerang;
  bool no_adjust_ = false;
  bool no_isolation_ = false;
  int n_ = 0;
  int period_ = 1;
  long horizon_ = 0;
  std::map<int, int> index_of_;  ///< agent id -> roster index
  std::map<int, Eigen::VectorXd> refs_;

  // evolving state
  long k_ = 0;
  std::vector<AgentState> agents_;
  std::vector<Eigen::VectorXd> x_base_, u_base_;
  net::AgentNetwork network_;
  bool twin_ = false;
  bool was_isolated_ = false;

  SimTrace trace_;
  SimTrace base_trace_;
  std::vector<BoundRow> bounds_;
};

/// Builds and runs one scenario; the returned trace has exactly `horizon`
/// step records and its events are ordered by k.
SimTrace run(const ScenarioConfig& config, const RunOptions& opts = {});

struct CounterfactualResult {
  SimTrace actual;
  SimTrace baseline;
  std::vector<Scenario::BoundRow> bounds;
};

/// Twin run: actual and no-malicious baseline trajectories sharing the seed,
/// topology, weight evolution, and schedules, plus the per-step deviation
/// costs with their spectral and block-separable bounds.
CounterfactualResult run_with_counterfactual(const ScenarioConfig& config,
                                             const RunOptions& opts = {});

/// Writes bound rows as CSV: k, agent_id, additional_cost, spectral_bound,
/// separable_bound, delta_total, malicious_neighbors.
void export_bounds(const std::vector<Scenario::BoundRow>& rows,
                   const std::filesystem::path& path);

}  // namespace opdyn::sim
