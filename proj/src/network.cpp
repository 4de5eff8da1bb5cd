#include "opdyn/network.hpp"

#include <string>

namespace opdyn::net {

void IsolationPolicy::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidConfig("rho must lie in (0,1)");
  if (!(cut_threshold > 0.0)) throw InvalidConfig("cut_threshold must be positive");
}

AgentNetwork::AgentNetwork(int n_agents, const std::vector<std::pair<int, int>>& edges,
                           std::vector<bool> malicious_flags) {
  if (n_agents <= 0) throw InvalidConfig("network needs at least one agent");
  if (static_cast<int>(malicious_flags.size()) != n_agents)
    throw InvalidConfig("one malicious flag per agent required");
  raw_.resize(n_agents);
  flags_ = std::move(malicious_flags);
  for (auto [i, j] : edges) {
    if (i < 0 || i >= n_agents || j < 0 || j >= n_agents)
      throw InvalidConfig("edge references an unknown agent");
    if (i == j) throw InvalidConfig("self-loops are not allowed");
    raw_[i][j] = 0.0;
    raw_[j][i] = 0.0;
  }
  for (auto& row : raw_) {
    const double w = row.empty() ? 0.0 : 1.0 / static_cast<double>(row.size());
    for (auto& [j, v] : row) v = w;
  }
}

AgentNetwork AgentNetwork::from_rows(std::vector<std::map<int, double>> rows,
                                     std::vector<bool> malicious_flags) {
  if (rows.size() != malicious_flags.size())
    throw InvalidConfig("one malicious flag per agent required");
  const int n = static_cast<int>(rows.size());
  for (int i = 0; i < n; ++i) {
    for (const auto& [j, w] : rows[i]) {
      if (j < 0 || j >= n || j == i) throw InvalidConfig("invalid neighbor id in row");
      if (w < 0.0) throw InvalidConfig("weights must be nonnegative");
      if (!rows[j].count(i)) throw InvalidConfig("adjacency must be symmetric");
    }
  }
  AgentNetwork net;
  net.raw_ = std::move(rows);
  net.flags_ = std::move(malicious_flags);
  return net;
}

void AgentNetwork::check_agent(int i) const {
  if (i < 0 || i >= size()) throw UnknownAgent("unknown agent index " + std::to_string(i));
}

bool AgentNetwork::flagged(int i) const {
  check_agent(i);
  return flags_[i];
}

std::vector<int> AgentNetwork::neighbors(int i) const {
  check_agent(i);
  std::vector<int> out;
  out.reserve(raw_[i].size());
  for (const auto& [j, w] : raw_[i]) out.push_back(j);
  return out;
}

std::vector<std::pair<int, double>> AgentNetwork::row(int i) const {
  check_agent(i);
  std::vector<std::pair<int, double>> out;
  out.reserve(raw_[i].size());
  double sum = 0.0;
  for (const auto& [j, w] : raw_[i]) sum += w;
  if (sum <= 0.0) return out;
  for (const auto& [j, w] : raw_[i]) out.emplace_back(j, w / sum);
  return out;
}

const std::map<int, double>& AgentNetwork::raw_row(int i) const {
  check_agent(i);
  return raw_[i];
}

std::vector<int> AgentNetwork::active_malicious_neighbors(int i) const {
  check_agent(i);
  std::vector<int> out;
  for (const auto& [j, w] : raw_[i])
    if (flags_[j]) out.push_back(j);
  return out;
}

bool AgentNetwork::all_isolated() const {
  for (int i = 0; i < size(); ++i) {
    if (flags_[i]) continue;
    for (const auto& [j, w] : raw_[i])
      if (flags_[j]) return false;
  }
  return true;
}

std::vector<CutEvent> AgentNetwork::decay_and_cut(const IsolationPolicy& policy, long k) {
  policy.validate();
  for (int i = 0; i < size(); ++i) {
    if (flags_[i]) continue;  // flagged agents keep their outgoing weights
    for (auto& [j, w] : raw_[i])
      if (flags_[j]) w *= policy.rho;
  }
  std::vector<CutEvent> cuts;
  for (int i = 0; i < size(); ++i) {
    if (flags_[i]) continue;
    for (const auto& [j, w] : raw_[i])
      if (flags_[j] && w < policy.cut_threshold) cuts.push_back({k, i, j});
  }
  for (const CutEvent& c : cuts) {
    raw_[c.i].erase(c.j);
    raw_[c.j].erase(c.i);
    log_.push_back(c);
  }
  return cuts;
}

}  // namespace opdyn::net
