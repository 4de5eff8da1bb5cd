#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opdyn/errors.hpp"

namespace opdyn::sim {

struct AgentRecord {
  int agent_id = -1;
  bool malicious_role = false;
  Eigen::VectorXd x;  ///< opinion at step k
  Eigen::VectorXd u;  ///< input computed at step k
  double step_cost = 0.0;        ///< u'Ru
  double discounted_cost = 0.0;  ///< (1-gamma)^-k u'Ru
  double dist_to_target = 0.0;
  double gamma = 0.0;  ///< rate in effect at step k
  int active_malicious_links = 0;
};

struct WeightRecord {
  int i = -1;
  int j = -1;
  double weight = 0.0;  ///< normalized w_ij at step k
};

struct Event {
  long k = 0;
  std::string type;
  std::string detail;
};

struct StepRecord {
  long k = 0;
  std::vector<AgentRecord> agents;    ///< ascending by agent_id
  std::vector<WeightRecord> weights;  ///< snapshot of all normalized rows
};

/// Complete per-run record: one StepRecord per step k = 1..horizon plus the
/// event stream (link cuts, period boundaries, schedule changes,
/// isolation-complete, convergence), ordered by k.
struct SimTrace {
  int n = 0;  ///< opinion dimension
  int m = 0;  ///< input dimension
  std::vector<StepRecord> steps;
  std::vector<Event> events;

  /// First step at which no normal agent retains a malicious link, if any.
  std::optional<long> isolation_step() const;
};

/// Writes the per-agent trace CSV: k, agent_id, role, x_1..x_n, u_1..u_m,
/// step_cost, discounted_cost, dist_to_target, gamma, active_malicious_links.
/// Values are rendered with 17 significant digits so the round trip is exact.
void export_trace(const SimTrace& trace, const std::filesystem::path& path);

/// Reads a file produced by export_trace (weights and events live in their
/// own files and are not restored).
SimTrace read_trace(const std::filesystem::path& path);

/// Events CSV: k, type, detail.
void export_events(const SimTrace& trace, const std::filesystem::path& path);

/// Weight snapshots CSV: k, i, j, weight.
void export_weights(const SimTrace& trace, const std::filesystem::path& path);

}  // namespace opdyn::sim
