#include "opdyn/trace.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace opdyn::sim {

std::optional<long> SimTrace::isolation_step() const {
  for (const StepRecord& s : steps) {
    int links = 0;
    for (const AgentRecord& a : s.agents)
      if (!a.malicious_role) links += a.active_malicious_links;
    if (links == 0) return s.k;
  }
  return std::nullopt;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void export_trace(const SimTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out << "k,agent_id,role";
  for (int i = 1; i <= trace.n; ++i) out << ",x_" << i;
  for (int i = 1; i <= trace.m; ++i) out << ",u_" << i;
  out << ",step_cost,discounted_cost,dist_to_target,gamma,active_malicious_links\n";
  for (const StepRecord& s : trace.steps) {
    for (const AgentRecord& a : s.agents) {
      out << s.k << ',' << a.agent_id << ',' << (a.malicious_role ? "malicious" : "normal");
      for (int i = 0; i < trace.n; ++i) out << ',' << fmt(a.x[i]);
      for (int i = 0; i < trace.m; ++i) out << ',' << fmt(a.u[i]);
      out << ',' << fmt(a.step_cost) << ',' << fmt(a.discounted_cost) << ','
          << fmt(a.dist_to_target) << ',' << fmt(a.gamma) << ',' << a.active_malicious_links
          << '\n';
    }
  }
  if (!out) throw IOFailure("failed while writing " + path.string());
}

SimTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IOFailure("missing header in " + path.string());
  const auto cols = split_csv(header);
  int n = 0, m = 0;
  for (const std::string& c : cols) {
    if (c.rfind("x_", 0) == 0) ++n;
    if (c.rfind("u_", 0) == 0) ++m;
  }
  SimTrace trace;
  trace.n = n;
  trace.m = m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<int>(f.size()) != 3 + n + m + 5)
      throw IOFailure("malformed row in " + path.string());
    AgentRecord a;
    const long k = std::strtol(f[0].c_str(), nullptr, 10);
    a.agent_id = static_cast<int>(std::strtol(f[1].c_str(), nullptr, 10));
    a.malicious_role = f[2] == "malicious";
    a.x.resize(n);
    a.u.resize(m);
    int idx = 3;
    for (int i = 0; i < n; ++i) a.x[i] = std::strtod(f[idx++].c_str(), nullptr);
    for (int i = 0; i < m; ++i) a.u[i] = std::strtod(f[idx++].c_str(), nullptr);
    a.step_cost = std::strtod(f[idx++].c_str(), nullptr);
    a.discounted_cost = std::strtod(f[idx++].c_str(), nullptr);
    a.dist_to_target = std::strtod(f[idx++].c_str(), nullptr);
    a.gamma = std::strtod(f[idx++].c_str(), nullptr);
    a.active_malicious_links = static_cast<int>(std::strtol(f[idx++].c_str(), nullptr, 10));
    if (trace.steps.empty() || trace.steps.back().k != k) {
      StepRecord s;
      s.k = k;
      trace.steps.push_back(std::move(s));
    }
    trace.steps.back().agents.push_back(std::move(a));
  }
  return trace;
}

void export_events(const SimTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out << "k,type,detail\n";
  for (const Event& e : trace.events) out << e.k << ',' << e.type << ',' << e.detail << '\n';
  if (!out) throw IOFailure("failed while writing " + path.string());
}

void export_weights(const SimTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out << "k,i,j,weight\n";
  for (const StepRecord& s : trace.steps)
    for (const WeightRecord& w : s.weights)
      out << s.k << ',' << w.i << ',' << w.j << ',' << fmt(w.weight) << '\n';
  if (!out) throw IOFailure("failed while writing " + path.string());
}

}  // namespace opdyn::sim
