#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "opdyn/errors.hpp"
#include "opdyn/trace.hpp"

namespace opdyn::costs {

/// (1-gamma)^-k u'Ru. The discount grows with k, up-weighting late inputs.
double discounted_step_cost(const Eigen::VectorXd& u, const Eigen::MatrixXd& R, double gamma,
                            long k);

/// Gram operator of the malicious-deviation quadratic form: with the stacking
/// S = [w_1 I_n ... w_N I_n], returns S'(K'RK)S, a symmetric PSD matrix of
/// size n*N.
Eigen::MatrixXd gram_operator(const Eigen::MatrixXd& K, const Eigen::MatrixXd& R,
                              std::span<const double> omegas, int n);

/// Everything needed to evaluate the deviation-cost bounds at one step.
/// delta_total bounds the stacked deviation norm ||z||; delta_per bounds each
/// per-neighbor block.
struct DeviationBoundInputs {
  Eigen::MatrixXd K;
  Eigen::MatrixXd R;
  std::vector<double> omegas;
  double delta_total = 0.0;
  std::vector<double> delta_per;
  double gamma = 0.0;
  long k = 0;
};

/// lambda_max(G) * delta_total^2 / (1-gamma)^k with G the Gram operator.
double spectral_bound(const DeviationBoundInputs& in);

/// Block-separable bound
/// lambda_max(K'RK) * (sum_j w_j^2) * (sum_j delta_j^2) / (1-gamma)^k.
/// Throws MissingPerNeighborBound when delta_per does not cover every
/// neighbor. Coincides with the spectral bound for a single neighbor with
/// delta_total = delta_1.
double separable_bound(const DeviationBoundInputs& in);

/// (1-gamma)^-k (u_a - u_b)' R (u_a - u_b).
double additional_cost(const Eigen::VectorXd& u_actual, const Eigen::VectorXd& u_baseline,
                       const Eigen::MatrixXd& R, double gamma, long k);

/// tr(G Sigma) / (1-gamma)^k: expected deviation cost under E[zz'] = Sigma.
double expected_additional_cost(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& sigma,
                                double gamma, long k);

/// Per-step input-cost bookkeeping; discounted totals must equal the sum of
/// their per-step entries.
struct CostLedger {
  struct Entry {
    long k = 0;
    int agent = -1;
    double step_cost = 0.0;
    double discounted_cost = 0.0;
    double gamma = 0.0;
  };
  std::vector<Entry> entries;

  double total() const;
  double discounted_total() const;
};

struct MetricsReport {
  double esc = 0.0;  ///< mean per-step normal-agent cost before isolation completes
  double lsc = 0.0;  ///< mean per-step normal-agent cost from isolation to convergence
  std::optional<long> convergence_step;
};

/// Table-style run metrics. The convergence step is the first k whose whole
/// dwell window keeps every normal agent within convergence_eps of its
/// target. The early window is [1, K_iso] with K_iso the isolation-complete
/// step (horizon/2 when isolation never completes); the late window runs from
/// there to the convergence step, or to the horizon without convergence.
MetricsReport metrics(const sim::SimTrace& trace, double convergence_eps = 0.05, int dwell = 10);

}  // namespace opdyn::costs
