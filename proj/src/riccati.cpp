#include "opdyn/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace opdyn::riccati {

using Eigen::MatrixXd;

void DiscountedLQRProblem::validate() const {
  if (A.rows() != A.cols()) throw InvalidConfig("A must be square");
  if (B.rows() != A.rows()) throw InvalidConfig("B row count must match A");
  if (R.rows() != R.cols() || R.rows() != B.cols())
    throw InvalidConfig("R must be square with size matching B columns");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidConfig("R must be symmetric within 1e-12");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (R + R.transpose()),
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidConfig("R must be strictly positive definite");
}

double default_pd_tolerance(const Eigen::MatrixXd& M) {
  const double n = static_cast<double>(M.rows());
  return 1e-12 * (1.0 + M.trace() / n);
}

bool is_positive_definite(const Eigen::MatrixXd& M, double tol) {
  if (M.rows() != M.cols() || M.rows() == 0) return false;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > tol;
}

bool is_positive_definite(const Eigen::MatrixXd& M) {
  return is_positive_definite(M, default_pd_tolerance(M));
}

bool is_stabilizable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()[i];
    if (std::abs(lambda) < 1.0) continue;
    Eigen::MatrixXcd pencil(n, n + m);
    pencil.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    pencil.rightCols(m) = B.cast<std::complex<double>>();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(pencil);
    if (qr.rank() < n) return false;
  }
  return true;
}

StabilityVerdict check_stability_condition(const DiscountedLQRProblem& problem,
                                           std::span<const double> gamma_seq) {
  problem.validate();
  if (gamma_seq.empty()) throw InvalidConfig("gamma sequence must be non-empty");
  for (double g : gamma_seq)
    if (!(g > 0.0 && g < 1.0)) throw InvalidConfig("every gamma must lie in (0,1)");

  StabilityVerdict v;
  double product = 1.0;
  for (double g : gamma_seq) product *= (1.0 - g);
  v.product_value = product;

  Eigen::EigenSolver<MatrixXd> es(problem.A, /*computeEigenvectors=*/false);
  const double min_mod = es.eigenvalues().cwiseAbs().minCoeff();
  v.min_eig_sq = min_mod * min_mod;
  v.product_condition_holds = product <= v.min_eig_sq;
  v.stabilizable = is_stabilizable(problem.A, problem.B);
  return v;
}

Eigen::MatrixXd compute_gain(const Eigen::MatrixXd& P, const DiscountedLQRProblem& problem) {
  if (!is_positive_definite(P)) throw NotPD("gain requested for a non-PD cost matrix");
  const MatrixXd BtP = problem.B.transpose() * P;
  const MatrixXd S = problem.R + BtP * problem.B;
  return S.llt().solve(BtP * problem.A);
}

namespace {

// Right-hand side of the recursion: A'PA - A'PB (R + B'PB)^-1 B'PA.
MatrixXd riccati_rhs(const DiscountedLQRProblem& pb, const MatrixXd& P_next) {
  const MatrixXd BtP = pb.B.transpose() * P_next;
  const MatrixXd S = pb.R + BtP * pb.B;
  const MatrixXd BtPA = BtP * pb.A;
  return pb.A.transpose() * P_next * pb.A - BtPA.transpose() * S.llt().solve(BtPA);
}

double relative_residual(const DiscountedLQRProblem& pb, std::span<const double> gammas,
                         const std::vector<MatrixXd>& P) {
  const int T = static_cast<int>(P.size());
  double worst = 0.0;
  for (int tau = 0; tau < T; ++tau) {
    const MatrixXd rhs = riccati_rhs(pb, P[(tau + 1) % T]);
    const double err = ((1.0 - gammas[tau]) * P[tau] - rhs).norm();
    worst = std::max(worst, err / std::max(1.0, P[tau].norm()));
  }
  return worst;
}

double monodromy_radius(const DiscountedLQRProblem& pb, const std::vector<MatrixXd>& K) {
  MatrixXd loop = MatrixXd::Identity(pb.n(), pb.n());
  for (const MatrixXd& gain : K) loop = (pb.A - pb.B * gain) * loop;
  Eigen::EigenSolver<MatrixXd> es(loop, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

enum class SweepStatus { converged, lost_pd, exhausted, diverged };

struct SweepOutcome {
  SweepStatus status = SweepStatus::exhausted;
  std::vector<MatrixXd> P;
  double residual = 0.0;
  int iterations = 0;
  int phase = 0;
};

SweepOutcome run_sweeps(const DiscountedLQRProblem& problem, std::span<const double> gamma_seq,
                        double tol, int max_iter, double start_scale) {
  const int T = static_cast<int>(gamma_seq.size());
  const int n = problem.n();
  SweepOutcome out;
  out.P.assign(T, start_scale * MatrixXd::Identity(n, n));

  double prev_change = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= max_iter; ++iter) {
    double change = 0.0;
    for (int tau = T - 1; tau >= 0; --tau) {
      MatrixXd P_new = riccati_rhs(problem, out.P[(tau + 1) % T]) / (1.0 - gamma_seq[tau]);
      P_new = 0.5 * (P_new + P_new.transpose()).eval();
      if (!is_positive_definite(P_new)) {
        out.status = SweepStatus::lost_pd;
        out.phase = tau + 1;
        out.iterations = iter;
        return out;
      }
      change = std::max(change, (P_new - out.P[tau]).norm() / std::max(1.0, P_new.norm()));
      out.P[tau] = std::move(P_new);
    }
    if (!std::isfinite(change) || change > 1e12) {
      out.status = SweepStatus::diverged;
      out.iterations = iter;
      return out;
    }

    // Geometric tail estimate of the remaining distance to the fixed point;
    // the per-sweep change alone under-reports the error when the contraction
    // ratio is close to 1.
    const double ratio = std::isfinite(prev_change) && prev_change > 0.0
                             ? std::min(change / prev_change, 0.999999)
                             : 1.0;
    const double tail = change == 0.0 ? 0.0 : change * ratio / (1.0 - ratio);
    prev_change = change;
    if (change <= tol && tail <= tol) {
      const double residual = relative_residual(problem, gamma_seq, out.P);
      if (residual <= tol) {
        out.status = SweepStatus::converged;
        out.residual = residual;
        out.iterations = iter;
        return out;
      }
    }
  }
  out.status = SweepStatus::exhausted;
  out.iterations = max_iter;
  return out;
}

}  // namespace

RiccatiSolution solve_pdare(const DiscountedLQRProblem& problem, std::span<const double> gamma_seq,
                            double tol, int max_iter) {
  problem.validate();
  if (!(tol > 0.0)) throw InvalidConfig("tol must be positive");
  const StabilityVerdict verdict = check_stability_condition(problem, gamma_seq);
  if (!verdict.stabilizable)
    throw ConditionViolated("pair {A,B} is not stabilizable");
  if (!verdict.product_condition_holds)
    throw ConditionViolated("existence condition fails: prod(1-gamma) = " +
                            std::to_string(verdict.product_value) + " > |lambda|_min^2 = " +
                            std::to_string(verdict.min_eig_sq));

  // The Q-free recursion has spurious fixed points (one per subset of
  // reflected modes); sweeps started near one can stall there with a tiny
  // residual. A solution is accepted only if its closed loop contracts over
  // one period; otherwise the sweep restarts from a larger multiple of the
  // identity, which dominates the maximal solution and cannot be trapped
  // below it.
  std::string last_error = "no sweep attempted";
  bool pd_failure = false;
  for (const double scale : {1.0, 1e2, 1e4, 1e6, 1e8}) {
    SweepOutcome out = run_sweeps(problem, gamma_seq, tol, max_iter, scale);
    switch (out.status) {
      case SweepStatus::converged: {
        RiccatiSolution sol;
        sol.P = std::move(out.P);
        sol.K.reserve(sol.P.size());
        for (const MatrixXd& P : sol.P) sol.K.push_back(compute_gain(P, problem));
        if (const double rho = monodromy_radius(problem, sol.K); rho >= 1.0) {
          last_error = "fixed point is not stabilizing (one-period spectral radius " +
                       std::to_string(rho) + ")";
          pd_failure = false;
          continue;
        }
        sol.residual = out.residual;
        sol.iterations = out.iterations;
        return sol;
      }
      case SweepStatus::lost_pd:
        last_error = "iterate lost positive definiteness at phase " + std::to_string(out.phase);
        pd_failure = true;
        continue;
      case SweepStatus::diverged:
        last_error = "iterates diverged";
        pd_failure = false;
        continue;
      case SweepStatus::exhausted:
        last_error = "no convergence within " + std::to_string(max_iter) + " sweeps";
        pd_failure = false;
        continue;
    }
  }
  if (pd_failure) throw NotPD("PDARE: " + last_error);
  throw NonConvergence("PDARE: " + last_error);
}

}  // namespace opdyn::riccati
