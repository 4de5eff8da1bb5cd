#include "opdyn/costs.hpp"

#include <algorithm>
#include <cmath>

namespace opdyn::costs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double discount_factor(double gamma, long k) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in [0,1)");
  return std::pow(1.0 - gamma, -static_cast<double>(k));
}

double max_eigenvalue(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sym + sym.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

double discounted_step_cost(const VectorXd& u, const MatrixXd& R, double gamma, long k) {
  if (R.rows() != u.size() || R.cols() != u.size())
    throw DimensionMismatch("R size must match the input vector");
  return discount_factor(gamma, k) * u.dot(R * u);
}

MatrixXd gram_operator(const MatrixXd& K, const MatrixXd& R, std::span<const double> omegas,
                       int n) {
  if (K.cols() != n) throw DimensionMismatch("gain columns must match the opinion dimension");
  if (R.rows() != K.rows() || R.cols() != K.rows())
    throw DimensionMismatch("R size must match the gain rows");
  const int count = static_cast<int>(omegas.size());
  MatrixXd S(n, n * count);
  for (int j = 0; j < count; ++j)
    S.middleCols(j * n, n) = omegas[j] * MatrixXd::Identity(n, n);
  const MatrixXd M = K.transpose() * R * K;
  return S.transpose() * M * S;
}

double spectral_bound(const DeviationBoundInputs& in) {
  const int n = static_cast<int>(in.K.cols());
  if (in.omegas.empty()) return 0.0;
  const MatrixXd G = gram_operator(in.K, in.R, in.omegas, n);
  return max_eigenvalue(G) * in.delta_total * in.delta_total * discount_factor(in.gamma, in.k);
}

double separable_bound(const DeviationBoundInputs& in) {
  if (in.delta_per.size() != in.omegas.size())
    throw MissingPerNeighborBound("one per-neighbor deviation bound required per weight");
  if (in.omegas.empty()) return 0.0;
  const MatrixXd M = in.K.transpose() * in.R * in.K;
  // Cauchy-Schwarz over the blocks: ||sum_j w_j v_j||^2 <= (sum w_j^2)(sum d_j^2).
  // The sums must stay separate; merging them into sum_j w_j^2 d_j^2 is not an
  // upper bound once deviation blocks align.
  double w_sq = 0.0;
  double d_sq = 0.0;
  for (std::size_t j = 0; j < in.omegas.size(); ++j) {
    w_sq += in.omegas[j] * in.omegas[j];
    d_sq += in.delta_per[j] * in.delta_per[j];
  }
  return max_eigenvalue(M) * w_sq * d_sq * discount_factor(in.gamma, in.k);
}

double additional_cost(const VectorXd& u_actual, const VectorXd& u_baseline, const MatrixXd& R,
                       double gamma, long k) {
  if (u_actual.size() != u_baseline.size())
    throw DimensionMismatch("actual and baseline inputs differ in dimension");
  const VectorXd d = u_actual - u_baseline;
  return discounted_step_cost(d, R, gamma, k);
}

double expected_additional_cost(const MatrixXd& gram, const MatrixXd& sigma, double gamma,
                                long k) {
  if (gram.rows() != sigma.rows() || gram.cols() != sigma.cols())
    throw DimensionMismatch("gram and covariance sizes differ");
  return (gram * sigma).trace() * discount_factor(gamma, k);
}

double CostLedger::total() const {
  double sum = 0.0;
  for (const Entry& e : entries) sum += e.step_cost;
  return sum;
}

double CostLedger::discounted_total() const {
  double sum = 0.0;
  for (const Entry& e : entries) sum += e.discounted_cost;
  return sum;
}

MetricsReport metrics(const sim::SimTrace& trace, double convergence_eps, int dwell) {
  if (trace.steps.empty()) throw EmptyTrace("metrics require a non-empty trace");
  if (dwell < 1) throw InvalidConfig("dwell must be at least 1");

  const long horizon = trace.steps.back().k;
  const std::size_t count = trace.steps.size();

  std::vector<double> normal_cost(count, 0.0);
  std::vector<double> worst_dist(count, 0.0);
  for (std::size_t s = 0; s < count; ++s) {
    for (const sim::AgentRecord& a : trace.steps[s].agents) {
      if (a.malicious_role) continue;
      normal_cost[s] += a.step_cost;
      worst_dist[s] = std::max(worst_dist[s], a.dist_to_target);
    }
  }

  MetricsReport report;

  // First step of the first dwell window that stays within eps throughout.
  for (std::size_t s = 0; s + dwell <= count; ++s) {
    bool sustained = true;
    for (int d = 0; d < dwell; ++d)
      if (worst_dist[s + d] > convergence_eps) {
        sustained = false;
        break;
      }
    if (sustained) {
      report.convergence_step = trace.steps[s].k;
      break;
    }
  }

  const long k_iso = trace.isolation_step().value_or(horizon / 2);

  double early_sum = 0.0;
  long early_n = 0;
  double late_sum = 0.0;
  long late_n = 0;
  const long late_end = report.convergence_step.value_or(horizon);
  for (std::size_t s = 0; s < count; ++s) {
    const long k = trace.steps[s].k;
    if (k <= k_iso) {
      early_sum += normal_cost[s];
      ++early_n;
    } else if (k <= late_end) {
      late_sum += normal_cost[s];
      ++late_n;
    }
  }
  report.esc = early_n > 0 ? early_sum / static_cast<double>(early_n) : 0.0;
  report.lsc = late_n > 0 ? late_sum / static_cast<double>(late_n) : 0.0;
  return report;
}

}  // namespace opdyn::costs
