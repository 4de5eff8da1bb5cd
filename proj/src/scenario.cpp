#include "opdyn/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <utility>

#include "opdyn/rng.hpp"

namespace opdyn::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Radius of the seeded sphere around +eta (normal) / -eta (malicious) used
// when a roster entry omits its target.
constexpr double kTargetSphereRadius = 0.3;

// Fraction of a flagged neighbor's trust weight that enters the repulsive
// fusion term. The rejection must carry only part of the trust mass: with
// half of a row flagged, feeding the full normalized weights into the
// repulsion gives the exposure phase a growth factor (1 + 1/2) A that no
// admissible gain can damp, and the swarm leaves the paper-scale regime in
// which input costs rise with the evolution rate.
constexpr double kRejectionStrength = 0.2;

VectorXd sample_in_ball(std::mt19937_64& gen, const VectorXd& center, double radius) {
  const int n = static_cast<int>(center.size());
  VectorXd offset(n);
  while (true) {
    for (int i = 0; i < n; ++i) offset[i] = rng::uniform(gen, -radius, radius);
    if (offset.norm() <= radius) break;
  }
  return center + offset;
}

}  // namespace

Scenario Scenario::build(const ScenarioConfig& config, const RunOptions& opts) {
  ScenarioConfig cfg = config;
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.horizon_override) cfg.horizon = *opts.horizon_override;
  if (opts.fusion_override) cfg.fusion_mode = *opts.fusion_override;

  if (cfg.agents.empty()) throw InvalidConfig("at least one agent is required");
  if (cfg.horizon < 1) throw InvalidConfig("horizon must be at least 1");
  cfg.norm.validate();
  cfg.isolation.validate();
  if (!(cfg.schedule.malicious_gamma > 0.0 && cfg.schedule.malicious_gamma < 1.0))
    throw InvalidConfig("malicious_gamma must lie in (0,1)");

  Scenario s;
  s.norm_ = cfg.norm;
  s.policy_ = cfg.isolation;
  s.adjust_ = {cfg.schedule.lambda, cfg.schedule.beta, cfg.schedule.delta};
  s.adjust_.validate();
  s.mode_ = cfg.fusion_mode;
  s.no_adjust_ = opts.no_adjust;
  s.no_isolation_ = opts.no_isolation;
  s.period_ = cfg.schedule.T;
  s.horizon_ = cfg.horizon;
  s.n_ = static_cast<int>(cfg.norm.eta.size());
  s.twin_ = cfg.counterfactual.has_value();
  if (s.twin_ && s.mode_ != FusionMode::boomerang)
    throw InvalidConfig("the counterfactual twin requires boomerang fusion");

  const AgentSpec& first = cfg.agents.front();
  if (!first.A || !first.B || !first.R)
    throw InvalidConfig("the first roster entry must carry the A, B, R template");

  for (const AgentSpec& spec : cfg.agents) {
    if (s.index_of_.count(spec.id)) throw InvalidConfig("duplicate agent id");
    s.index_of_[spec.id] = static_cast<int>(s.agents_.size());
    s.agents_.push_back({});
    s.agents_.back().id = spec.id;
    s.agents_.back().role = spec.role;
  }

  // Seeded draws happen per agent in roster order: first the diagonal
  // perturbation of A, then any missing target. This order is part of the
  // determinism contract.
  std::mt19937_64 gen(cfg.seed);
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    const AgentSpec& spec = cfg.agents[i];
    AgentState& a = s.agents_[i];
    a.problem.A = spec.A ? *spec.A : *first.A;
    a.problem.B = spec.B ? *spec.B : *first.B;
    a.problem.R = spec.R ? *spec.R : *first.R;
    if (spec.a_diag_perturb < 0.0) throw InvalidConfig("a_diag_perturb must be nonnegative");
    if (spec.a_diag_perturb > 0.0) {
      const double shift = rng::u01(gen) * spec.a_diag_perturb;
      a.problem.A.diagonal().array() += shift;
    }
    a.problem.validate();
    if (a.problem.n() != s.n_)
      throw InvalidConfig("agent state dimension must match the norm center");

    const VectorXd center = spec.role == Role::normal ? cfg.norm.eta : VectorXd(-cfg.norm.eta);
    a.x_target = spec.target ? *spec.target : sample_in_ball(gen, center, kTargetSphereRadius);
    if (a.x_target.size() != s.n_) throw InvalidConfig("target dimension mismatch");
    const bool inside = fusion::in_norm_range(a.x_target, cfg.norm);
    if (spec.role == Role::normal && !inside)
      throw InvalidConfig("normal agent " + std::to_string(spec.id) +
                          " has a target outside the social norm region");
    if (spec.role == Role::malicious && inside)
      throw InvalidConfig("malicious agent " + std::to_string(spec.id) +
                          " has a target inside the social norm region");

    a.x = VectorXd::Zero(s.n_);
    a.schedule = spec.role == Role::normal
                     ? sched::GammaSchedule::create(cfg.schedule.T, cfg.schedule.initial,
                                                    cfg.schedule.levels, cfg.schedule.lower,
                                                    cfg.schedule.upper)
                     : sched::GammaSchedule::constant(cfg.schedule.malicious_gamma);

    if (!riccati::is_stabilizable(a.problem.A, a.problem.B))
      throw NotStabilizable("agent " + std::to_string(spec.id) + ": {A,B} is not stabilizable");
    const auto verdict = riccati::check_stability_condition(a.problem, a.schedule.current);
    if (!verdict.product_condition_holds)
      throw ConditionViolated("agent " + std::to_string(spec.id) +
                              ": schedule violates the existence condition (product " +
                              std::to_string(verdict.product_value) + " > " +
                              std::to_string(verdict.min_eig_sq) + ")");
    a.solution = riccati::solve_pdare(a.problem, a.schedule.current);
  }

  // Undirected edge list by agent id, deduplicated; flags mirror the roles.
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> edges;
  for (auto [u, v] : cfg.edges) {
    if (!s.index_of_.count(u) || !s.index_of_.count(v))
      throw InvalidConfig("edge references an unknown agent id");
    const int a = s.index_of_[u], b = s.index_of_[v];
    if (a == b) throw InvalidConfig("self-loops are not allowed");
    if (seen.insert({std::min(a, b), std::max(a, b)}).second) edges.emplace_back(a, b);
  }
  std::vector<bool> flags;
  flags.reserve(s.agents_.size());
  for (const AgentState& a : s.agents_) flags.push_back(a.role == Role::malicious);
  s.network_ = net::AgentNetwork(static_cast<int>(s.agents_.size()), edges, std::move(flags));
  s.was_isolated_ = s.network_.all_isolated();

  if (s.twin_) {
    VectorXd ref = cfg.counterfactual->reference ? *cfg.counterfactual->reference : cfg.norm.eta;
    if (ref.size() != s.n_) throw InvalidConfig("counterfactual reference dimension mismatch");
    for (const AgentState& a : s.agents_)
      if (a.role == Role::malicious) s.refs_[a.id] = ref;
    s.x_base_.assign(s.agents_.size(), VectorXd::Zero(s.n_));
    s.u_base_.resize(s.agents_.size());
  }

  s.trace_.n = s.n_;
  s.trace_.m = s.agents_.front().problem.m();
  s.base_trace_.n = s.trace_.n;
  s.base_trace_.m = s.trace_.m;

  // Prime the input cache for k = 0 (phase wraps to T under the periodic
  // extension); the first transition applies these inputs.
  for (std::size_t i = 0; i < s.agents_.size(); ++i) {
    AgentState& a = s.agents_[i];
    const int tau = sched::phase_index(0, a.schedule.T);
    a.u = -(a.solution.K[tau] * (a.x - a.x_target));
    if (s.twin_) s.u_base_[i] = -(a.solution.K[tau] * (s.x_base_[i] - a.x_target));
  }
  return s;
}

const SimTrace& Scenario::baseline_trace() const {
  if (!twin_) throw InvalidConfig("scenario has no counterfactual twin");
  return base_trace_;
}

void Scenario::push_event(long k, std::string type, std::string detail) {
  trace_.events.push_back({k, std::move(type), std::move(detail)});
}

VectorXd Scenario::fused_opinion(int idx, bool baseline) const {
  const AgentState& a = agents_[idx];
  const VectorXd& own = baseline ? x_base_[idx] : a.x;
  if (a.role == Role::malicious) return fusion::stubborn_fuse(own);
  const auto row = network_.row(idx);

  if (mode_ == FusionMode::averaging) {
    // Vulnerable baseline: assimilate every neighbor, malicious included.
    std::vector<VectorXd> xs;
    std::vector<double> ws;
    xs.reserve(row.size());
    ws.reserve(row.size());
    for (auto [j, w] : row) {
      xs.push_back(baseline ? x_base_[j] : agents_[j].x);
      ws.push_back(w);
    }
    return fusion::averaging_fuse(own, xs, ws);
  }

  // Adversarial rule: the repulsive sum runs over the flagged neighbors with
  // their trust weights. Benign links hold weight mass but contribute no
  // fusion term, so once every flagged link is cut the fused opinion
  // degenerates to the agent's own and the tracking loop runs undisturbed.
  // Summing over benign neighbors as well would double their disagreement
  // each step (2x - sum w x has spectral radius near 2) and no admissible
  // gain could keep the swarm bounded.
  if (baseline) {
    std::vector<fusion::NeighborOpinion> nbs;
    for (auto [j, w] : row) {
      if (!network_.flagged(j)) continue;
      nbs.push_back({agents_[j].id, x_base_[j], kRejectionStrength * w,
                     agents_[j].role == Role::malicious});
    }
    return fusion::counterfactual_fuse(own, nbs, refs_);
  }
  std::vector<VectorXd> xs;
  std::vector<double> ws;
  for (auto [j, w] : row) {
    if (!network_.flagged(j)) continue;
    xs.push_back(agents_[j].x);
    ws.push_back(kRejectionStrength * w);
  }
  return fusion::boomerang_fuse(own, xs, ws);
}

void Scenario::step() {
  if (k_ >= horizon_) throw InvalidConfig("stepping past the horizon");
  const int N = static_cast<int>(agents_.size());

  // All fusions and transitions read the k-snapshot; agent order is
  // irrelevant. The opinion deviation from the target is what follows the
  // linear dynamics: x(k+1) = x^t + A (x^f - x^t) + B u. Driving the absolute
  // opinion through A instead would leave a standing offset (A - I) x^t that
  // no deviation feedback can remove, and opinions would never settle on
  // their targets.
  std::vector<VectorXd> x_next(N);
  std::vector<VectorXd> xb_next(twin_ ? N : 0);
  for (int i = 0; i < N; ++i) {
    const AgentState& a = agents_[i];
    x_next[i] = a.x_target + a.problem.A * (fused_opinion(i, false) - a.x_target) +
                a.problem.B * a.u;
    if (twin_)
      xb_next[i] = a.x_target + a.problem.A * (fused_opinion(i, true) - a.x_target) +
                   a.problem.B * u_base_[i];
  }
  for (int i = 0; i < N; ++i) agents_[i].x = std::move(x_next[i]);
  if (twin_) x_base_ = std::move(xb_next);
  ++k_;

  if (!no_isolation_) {
    const auto cuts = network_.decay_and_cut(policy_, k_);
    for (const auto& c : cuts)
      push_event(k_, "link-cut",
                 std::to_string(agents_[c.i].id) + "-" + std::to_string(agents_[c.j].id));
    if (!was_isolated_ && network_.all_isolated()) {
      was_isolated_ = true;
      push_event(k_, "isolation-complete", "");
    }
  }

  if (!no_adjust_ && k_ % period_ == 0) {
    push_event(k_, "period-boundary", "");
    for (int i = 0; i < N; ++i) {
      AgentState& a = agents_[i];
      if (a.role != Role::normal) continue;
      const bool flag = !network_.active_malicious_neighbors(i).empty();
      auto res = sched::on_period_boundary(a.schedule, flag, adjust_);
      if (res.clip_status != sched::ClipStatus::clipped)
        push_event(k_, "schedule-saturated",
                   "agent=" + std::to_string(a.id) +
                       (res.clip_status == sched::ClipStatus::at_floor ? " floor" : " ceiling"));
      const bool changed = res.changed;
      a.schedule = std::move(res.sched);
      if (changed) {
        a.solution = riccati::solve_pdare(a.problem, a.schedule.current);
        for (const MatrixXd& P : a.solution.P)
          if (!riccati::is_positive_definite(P))
            throw NotPD("agent " + std::to_string(a.id) +
                        ": re-solved cost matrix lost positive definiteness");
        push_event(k_, "schedule-change", "agent=" + std::to_string(a.id));
      }
    }
  }

  record_step();
}

void Scenario::record_step() {
  // Emission order is ascending agent id so traces do not depend on roster
  // order.
  std::vector<int> order(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [this](int a, int b) { return agents_[a].id < agents_[b].id; });

  StepRecord rec;
  rec.k = k_;
  StepRecord base_rec;
  base_rec.k = k_;

  for (int idx : order) {
    AgentState& a = agents_[idx];
    const int tau = sched::phase_index(k_, a.schedule.T);
    const double gamma = a.schedule.current[tau];
    const double discount = std::pow(1.0 - gamma, -static_cast<double>(k_));
    a.u = -(a.solution.K[tau] * (a.x - a.x_target));

    AgentRecord r;
    r.agent_id = a.id;
    r.malicious_role = a.role == Role::malicious;
    r.x = a.x;
    r.u = a.u;
    r.step_cost = a.u.dot(a.problem.R * a.u);
    r.discounted_cost = discount * r.step_cost;
    r.dist_to_target = (a.x - a.x_target).norm();
    r.gamma = gamma;
    r.active_malicious_links =
        static_cast<int>(network_.active_malicious_neighbors(idx).size());
    rec.agents.push_back(std::move(r));

    if (twin_) {
      u_base_[idx] = -(a.solution.K[tau] * (x_base_[idx] - a.x_target));
      AgentRecord rb;
      rb.agent_id = a.id;
      rb.malicious_role = a.role == Role::malicious;
      rb.x = x_base_[idx];
      rb.u = u_base_[idx];
      rb.step_cost = u_base_[idx].dot(a.problem.R * u_base_[idx]);
      rb.discounted_cost = discount * rb.step_cost;
      rb.dist_to_target = (x_base_[idx] - a.x_target).norm();
      rb.gamma = gamma;
      rb.active_malicious_links = rec.agents.back().active_malicious_links;
      base_rec.agents.push_back(std::move(rb));
    }
  }

  std::vector<WeightRecord> weights;
  for (int idx : order) {
    std::vector<WeightRecord> row;
    for (auto [j, w] : network_.row(idx)) row.push_back({agents_[idx].id, agents_[j].id, w});
    std::sort(row.begin(), row.end(),
              [](const WeightRecord& a, const WeightRecord& b) { return a.j < b.j; });
    weights.insert(weights.end(), row.begin(), row.end());
  }
  rec.weights = weights;
  if (twin_) base_rec.weights = std::move(weights);

  if (twin_) {
    // Per-step deviation costs on the actual trajectory: the fused-state
    // perturbation sum_j w_ij (ref_j - x_j) maps through the gain into the
    // one-step counterfactual input.
    for (int idx : order) {
      const AgentState& a = agents_[idx];
      if (a.role != Role::normal) continue;
      std::vector<double> omegas, delta_per;
      std::vector<VectorXd> blocks;
      for (auto [j, w] : network_.row(idx)) {
        if (agents_[j].role != Role::malicious) continue;
        omegas.push_back(kRejectionStrength * w);  // the weights the fusion applied
        blocks.push_back(refs_.at(agents_[j].id) - agents_[j].x);
        delta_per.push_back(blocks.back().norm());
      }
      if (omegas.empty()) continue;
      const int tau = sched::phase_index(k_, a.schedule.T);
      const double gamma = a.schedule.current[tau];
      VectorXd sz = VectorXd::Zero(n_);
      double total_sq = 0.0;
      for (std::size_t j = 0; j < omegas.size(); ++j) {
        sz += omegas[j] * blocks[j];
        total_sq += blocks[j].squaredNorm();
      }
      const VectorXd delta_u = a.solution.K[tau] * sz;
      const VectorXd u_onestep = a.u - delta_u;

      BoundRow row;
      row.k = k_;
      row.agent = a.id;
      row.additional_cost = costs::additional_cost(a.u, u_onestep, a.problem.R, gamma, k_);
      costs::DeviationBoundInputs in;
      in.K = a.solution.K[tau];
      in.R = a.problem.R;
      in.omegas = omegas;
      in.delta_total = std::sqrt(total_sq);
      in.delta_per = delta_per;
      in.gamma = gamma;
      in.k = k_;
      row.spectral = costs::spectral_bound(in);
      row.separable = costs::separable_bound(in);
      row.delta_total = in.delta_total;
      row.malicious_neighbors = static_cast<int>(omegas.size());
      bounds_.push_back(std::move(row));
    }
  }

  trace_.steps.push_back(std::move(rec));
  if (twin_) base_trace_.steps.push_back(std::move(base_rec));
}

void Scenario::finalize_events() {
  if (twin_) base_trace_.events = trace_.events;
  const auto rep = costs::metrics(trace_);
  if (rep.convergence_step)
    push_event(*rep.convergence_step, "convergence", "");
  if (twin_) {
    const auto base_rep = costs::metrics(base_trace_);
    if (base_rep.convergence_step)
      base_trace_.events.push_back({*base_rep.convergence_step, "convergence", ""});
  }
  auto by_k = [](const Event& a, const Event& b) { return a.k < b.k; };
  std::stable_sort(trace_.events.begin(), trace_.events.end(), by_k);
  std::stable_sort(base_trace_.events.begin(), base_trace_.events.end(), by_k);
}

void Scenario::run_to_horizon() {
  while (k_ < horizon_) step();
  finalize_events();
}

SimTrace run(const ScenarioConfig& config, const RunOptions& opts) {
  Scenario s = Scenario::build(config, opts);
  s.run_to_horizon();
  return s.trace();
}

CounterfactualResult run_with_counterfactual(const ScenarioConfig& config,
                                             const RunOptions& opts) {
  if (!config.counterfactual)
    throw InvalidConfig("run_with_counterfactual requires a counterfactual spec");
  Scenario s = Scenario::build(config, opts);
  s.run_to_horizon();
  return {s.trace(), s.baseline_trace(), s.bound_rows()};
}

void export_bounds(const std::vector<Scenario::BoundRow>& rows,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out << "k,agent_id,additional_cost,spectral_bound,separable_bound,delta_total,"
         "malicious_neighbors\n";
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows)
    out << r.k << ',' << r.agent << ',' << fmt(r.additional_cost) << ',' << fmt(r.spectral)
        << ',' << fmt(r.separable) << ',' << fmt(r.delta_total) << ',' << r.malicious_neighbors
        << '\n';
  if (!out) throw IOFailure("failed while writing " + path.string());
}

}  // namespace opdyn::sim
