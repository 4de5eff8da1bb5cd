#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "opdyn/errors.hpp"

namespace opdyn::riccati {

/// Discounted LQR problem data for one agent: dynamics x(k+1) = A x + B u with
/// input-cost metric R (symmetric positive definite). The cost functional has
/// no state-weighting term, so the Riccati recursion below carries no additive
/// Q.
struct DiscountedLQRProblem {
  Eigen::MatrixXd A;  ///< n x n state transition
  Eigen::MatrixXd B;  ///< n x m input map
  Eigen::MatrixXd R;  ///< m x m input-cost metric, SPD

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  /// Throws InvalidConfig on inconsistent dimensions or a non-SPD R.
  void validate() const;
};

/// T-periodic solution of the discounted Riccati fixed point, one (P, K) pair
/// per schedule phase.
struct RiccatiSolution {
  std::vector<Eigen::MatrixXd> P;  ///< SPD cost-to-go matrices, one per phase
  std::vector<Eigen::MatrixXd> K;  ///< gains K(tau) = (R + B'P(tau)B)^-1 B'P(tau)A
  double residual = 0.0;  ///< max relative Frobenius residual across phases
  int iterations = 0;     ///< fixed-point sweeps performed
};

/// Diagnostic outcome of the periodic existence test. `product_value` is
/// prod_tau (1 - gamma^(tau)) and `min_eig_sq` the squared smallest eigenvalue
/// modulus of A (the transpose has the same spectrum).
struct StabilityVerdict {
  bool stabilizable = false;
  bool product_condition_holds = false;
  double product_value = 0.0;
  double min_eig_sq = 0.0;

  bool ok() const { return stabilizable && product_condition_holds; }
};

/// Scale-aware eigenvalue floor used by the single-argument PD check:
/// 1e-12 * (1 + trace(M)/n).
double default_pd_tolerance(const Eigen::MatrixXd& M);

/// True iff M is symmetric within tol and its minimum eigenvalue exceeds tol.
bool is_positive_definite(const Eigen::MatrixXd& M, double tol);
bool is_positive_definite(const Eigen::MatrixXd& M);

/// PBH test: true iff rank [lambda I - A, B] = n for every eigenvalue lambda
/// of A with |lambda| >= 1.
bool is_stabilizable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Evaluates prod_tau (1 - gamma^(tau)) <= |lambda(A)|_min^2 together with the
/// PBH test. Diagnostic: a failed condition is reported, not thrown. Every
/// gamma must lie in (0,1).
StabilityVerdict check_stability_condition(const DiscountedLQRProblem& problem,
                                           std::span<const double> gamma_seq);

/// K = (R + B'PB)^-1 B'PA. Throws NotPD if P fails the default PD check.
Eigen::MatrixXd compute_gain(const Eigen::MatrixXd& P, const DiscountedLQRProblem& problem);

/// Solves the T-periodic discounted Riccati fixed point
///
///   (1 - gamma^(tau)) P(tau) = A'P(tau+1)A
///       - A'P(tau+1)B (R + B'P(tau+1)B)^-1 B'P(tau+1)A,    P(T+1) = P(1),
///
/// by cyclic backward fixed-point sweeps (tau = T..1) starting from P = I.
/// Convergence is declared when the per-sweep relative Frobenius change and
/// its geometric tail estimate both fall below tol and the substituted
/// residual confirms it; the tail estimate is needed because the sweep map
/// contracts arbitrarily slowly near the existence boundary. `tol` is
/// relative (Frobenius, against max(1, |P|)).
///
/// The Q-free recursion admits non-stabilizing fixed points, so a candidate
/// is accepted only if its one-period closed loop is a strict contraction;
/// otherwise the sweep restarts from a larger initial multiple of the
/// identity (which sits above the maximal solution and converges to it).
///
/// Throws ConditionViolated when check_stability_condition fails, NotPD when
/// iterates lose positive definiteness, NonConvergence when no stabilizing
/// fixed point is reached within max_iter sweeps per restart.
RiccatiSolution solve_pdare(const DiscountedLQRProblem& problem, std::span<const double> gamma_seq,
                            double tol = 1e-10, int max_iter = 100000);

}  // namespace opdyn::riccati
