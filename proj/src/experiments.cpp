#include "opdyn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "opdyn/rng.hpp"
#include "opdyn/scheduler.hpp"

namespace opdyn::experiments {

using Eigen::MatrixXd;
using Eigen::VectorXd;

BoundTrialSummary run_bound_trials(int trials, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  BoundTrialSummary summary;
  summary.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const int n = 1 + static_cast<int>(gen() % 3);
    const int m = 1 + static_cast<int>(gen() % 3);
    const int count = 1 + static_cast<int>(gen() % 3);

    MatrixXd K(m, n);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) K(r, c) = rng::uniform(gen, -2.0, 2.0);
    MatrixXd seed_mat(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) seed_mat(r, c) = rng::uniform(gen, -1.0, 1.0);
    const MatrixXd R = seed_mat.transpose() * seed_mat + 0.1 * MatrixXd::Identity(m, m);

    std::vector<double> omegas(count), delta_per(count);
    std::vector<VectorXd> blocks(count);
    double total_sq = 0.0;
    for (int j = 0; j < count; ++j) {
      omegas[j] = rng::uniform(gen, 0.0, 1.0);
      blocks[j] = VectorXd(n);
      for (int c = 0; c < n; ++c) blocks[j][c] = rng::uniform(gen, -1.0, 1.0);
      delta_per[j] = blocks[j].norm() * (1.0 + rng::uniform(gen, 0.0, 0.5));
      total_sq += blocks[j].squaredNorm();
    }
    const double gamma = rng::uniform(gen, 0.0, 0.5);
    const long k = static_cast<long>(gen() % 6);

    costs::DeviationBoundInputs in;
    in.K = K;
    in.R = R;
    in.omegas = omegas;
    in.delta_total = std::sqrt(total_sq) * (1.0 + rng::uniform(gen, 0.0, 0.5));
    in.delta_per = delta_per;
    in.gamma = gamma;
    in.k = k;

    VectorXd sz = VectorXd::Zero(n);
    for (int j = 0; j < count; ++j) sz += omegas[j] * blocks[j];
    const VectorXd delta_u = K * sz;
    const double dj =
        costs::additional_cost(delta_u, VectorXd::Zero(m), R, gamma, k);
    const double spec = costs::spectral_bound(in);
    const double sep = costs::separable_bound(in);

    const bool ok_spec = dj <= spec * (1.0 + 1e-9) + 1e-15;
    const bool ok_sep = dj <= sep * (1.0 + 1e-9) + 1e-15;
    if (!ok_spec || !ok_sep) ++summary.violations;
    if (spec > 0.0)
      summary.worst_spectral_margin = std::min(summary.worst_spectral_margin, 1.0 - dj / spec);
    if (sep > 0.0)
      summary.worst_separable_margin = std::min(summary.worst_separable_margin, 1.0 - dj / sep);

    // Deviation aligned with the top eigenvector of the Gram operator must
    // meet the spectral bound essentially exactly.
    const MatrixXd G = costs::gram_operator(K, R, omegas, n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
    const VectorXd z_top = in.delta_total * es.eigenvectors().col(G.cols() - 1);
    VectorXd sz_top = VectorXd::Zero(n);
    for (int j = 0; j < count; ++j) sz_top += omegas[j] * z_top.segment(j * n, n);
    const double dj_top =
        costs::additional_cost(K * sz_top, VectorXd::Zero(m), R, gamma, k);
    if (spec > 0.0)
      summary.worst_tightness_rel_err =
          std::max(summary.worst_tightness_rel_err, std::abs(dj_top - spec) / spec);
  }
  return summary;
}

ScheduleVariant make_schedule_variant(const sim::ScenarioConfig& base, const std::string& token) {
  ScheduleVariant out;
  out.label = token;
  out.config = base;
  if (token == "time-varying") {
    out.adaptive = true;
    return out;
  }
  if (token.rfind("period", 0) == 0) {
    const int n = std::stoi(token.substr(6));
    if (n < 1) throw InvalidConfig("period index must be at least 1");
    std::vector<double> seq = base.schedule.initial;
    for (int i = 1; i < n; ++i) {
      auto clipped = sched::peak_clip(seq, base.schedule.levels, /*flag=*/true);
      if (clipped.status != sched::ClipStatus::clipped) break;  // parked at the floor
      seq = std::move(clipped.seq);
    }
    out.config.schedule.initial = std::move(seq);
    out.adaptive = false;
    return out;
  }
  if (token.rfind("const:", 0) == 0) {
    const double g = std::stod(token.substr(6));
    if (!(g > 0.0 && g < 1.0)) throw InvalidConfig("constant rate must lie in (0,1)");
    auto& sch = out.config.schedule;
    sch.initial.assign(sch.initial.size(), g);
    for (double& lo : sch.lower) lo = std::min(lo, g);
    for (double& hi : sch.upper) hi = std::max(hi, g);
    out.adaptive = false;
    return out;
  }
  throw InvalidConfig("unknown schedule token '" + token +
                      "' (expected time-varying, periodN, or const:X)");
}

std::string format_metrics_table(std::span<const SweepRow> rows) {
  std::ostringstream out;
  std::size_t width = 12;
  for (const SweepRow& r : rows) width = std::max(width, r.label.size() + 2);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %18s\n", static_cast<int>(width), "schedule",
                "ESC", "LSC", "convergence step");
  out << buf;
  for (const SweepRow& r : rows) {
    std::string conv = r.metrics.convergence_step
                           ? std::to_string(*r.metrics.convergence_step)
                           : std::string("-");
    std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.4f %18s\n", static_cast<int>(width),
                  r.label.c_str(), r.metrics.esc, r.metrics.lsc, conv.c_str());
    out << buf;
  }
  return out.str();
}

void write_metrics_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOFailure("cannot open " + path.string() + " for writing");
  out << "schedule,esc,lsc,convergence_step\n";
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const SweepRow& r : rows) {
    out << r.label << ',' << fmt(r.metrics.esc) << ',' << fmt(r.metrics.lsc) << ',';
    if (r.metrics.convergence_step) out << *r.metrics.convergence_step;
    out << '\n';
  }
  if (!out) throw IOFailure("failed while writing " + path.string());
}

}  // namespace opdyn::experiments
