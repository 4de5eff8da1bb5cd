#pragma once

#include <map>
#include <utility>
#include <vector>

#include "opdyn/errors.hpp"

namespace opdyn::net {

/// Geometric trust decay toward flagged agents: each step multiplies the
/// stored weight by rho, and a link whose stored weight falls below
/// cut_threshold is removed permanently.
struct IsolationPolicy {
  double rho = 0.9;
  double cut_threshold = 0.02;

  void validate() const;
};

struct CutEvent {
  long k = 0;
  int i = -1;
  int j = -1;
};

/// Undirected interaction graph with per-agent trust weights and externally
/// supplied suspicion flags.
///
/// Each row stores the raw decayed weights: decay compounds geometrically and
/// the cut decision reads the raw value, so a link's lifetime depends only on
/// rho and the threshold. row() exposes the renormalized view (sum 1), which
/// is what fusion consumes and the trace records.
class AgentNetwork {
 public:
  AgentNetwork() = default;

  /// Uniform initial weights 1/|N_i| over the undirected edge list. Agents are
  /// indexed 0..n-1; edges are deduplicated and applied symmetrically.
  AgentNetwork(int n_agents, const std::vector<std::pair<int, int>>& edges,
               std::vector<bool> malicious_flags);

  /// Explicit raw rows (tests and custom scenarios). Rows must be symmetric in
  /// adjacency and weights must be nonnegative.
  static AgentNetwork from_rows(std::vector<std::map<int, double>> rows,
                                std::vector<bool> malicious_flags);

  int size() const { return static_cast<int>(raw_.size()); }
  bool flagged(int i) const;

  /// Active neighbor ids of i, ascending.
  std::vector<int> neighbors(int i) const;

  /// Normalized trust row of i: (j, w_ij) with sum_j w_ij = 1, ascending by j.
  /// Empty when the agent has no active neighbors.
  std::vector<std::pair<int, double>> row(int i) const;

  /// Raw (un-renormalized) decayed weights of i.
  const std::map<int, double>& raw_row(int i) const;

  /// Flagged agents currently linked to i, ascending.
  std::vector<int> active_malicious_neighbors(int i) const;

  /// True iff no unflagged agent retains an active link to a flagged agent.
  bool all_isolated() const;

  /// One decay step at time k: every unflagged agent's weights toward flagged
  /// neighbors shrink by rho; links whose decayed weight drops below the
  /// threshold are cut in both directions and logged. Returns the new cuts.
  std::vector<CutEvent> decay_and_cut(const IsolationPolicy& policy, long k);

  const std::vector<CutEvent>& cut_log() const { return log_; }

 private:
  void check_agent(int i) const;

  std::vector<std::map<int, double>> raw_;
  std::vector<bool> flags_;
  std::vector<CutEvent> log_;
};

}  // namespace opdyn::net
