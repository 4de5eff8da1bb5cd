#pragma once

#include <span>
#include <vector>

#include "opdyn/errors.hpp"

namespace opdyn::sched {

/// Knobs of the per-period rate adjustment: blend strength between the
/// momentum point and the clipped reference, momentum weight, and a trust
/// radius capping each per-phase move.
struct AdjustParams {
  double lambda = 1.0;  ///< in [0,1]
  double beta = 0.0;    ///< in [0,1)
  double delta = 0.1;   ///< > 0

  void validate() const;
};

/// T-periodic evolution-rate sequence with its quantized level grid, per-phase
/// admissible bounds, suspicion flag, and the two previous committed
/// sequences (momentum history).
struct GammaSchedule {
  int T = 0;
  std::vector<double> current;  ///< gamma^(tau), tau = 1..T, each in (0,1)
  std::vector<double> prev;     ///< sequence one period back
  std::vector<double> prev2;    ///< sequence two periods back
  std::vector<double> levels;   ///< strictly increasing grid, all in (0,1)
  std::vector<double> lower;    ///< per-phase lower bounds
  std::vector<double> upper;    ///< per-phase upper bounds
  bool flag = false;            ///< true while suspicion is active (adjust downward)

  /// Projects the initial sequence into [lower, upper], seeds prev = prev2 =
  /// current, and validates all invariants.
  static GammaSchedule create(int T, std::vector<double> initial, std::vector<double> levels,
                              std::vector<double> lower, std::vector<double> upper);

  /// Degenerate single-phase schedule pinned at a constant rate.
  static GammaSchedule constant(double gamma);

  void validate() const;
};

/// 0-based phase of step k under period T: k = 1 maps to phase 0 and k = 0
/// wraps to phase T-1 (periodic extension).
int phase_index(long k, int T);

/// current[tau(k)] with tau = ((k-1) mod T) + 1; steps are 1-indexed.
double gamma_at(const GammaSchedule& sched, long k);

enum class ClipStatus { clipped, at_floor, at_ceiling };

struct ClipResult {
  std::vector<double> seq;
  ClipStatus status = ClipStatus::clipped;
};

/// Replaces every occurrence of max(seq) with the nearest grid level strictly
/// below it (flag true) or strictly above it (flag false). When no such level
/// exists the sequence is returned unchanged with the saturation status. All
/// other entries are copied bit-identically.
ClipResult peak_clip(std::span<const double> seq, std::span<const double> levels, bool flag);

/// Stationary point of 1/2 (1-lambda)(u-v)^2 + 1/2 lambda (u-ref)^2:
/// (1-lambda) v + lambda ref.
double blend(double v, double ref, double lambda);

/// One period-boundary update against a clipped reference sequence. Per phase:
/// momentum point v = prev + beta (prev - prev2), blend toward ref, clip the
/// move to the trust radius, project into [L, upper] with the reference floor
/// L = max(lower, min(ref, upper)), then apply the monotone clamp (down when
/// flag is set, up otherwise); the admissible interval wins every conflict.
/// Histories shift: prev2 <- prev, prev <- old current, current <- result.
/// Throws InfeasibleBounds when lower > upper at some phase.
GammaSchedule rate_adjust(const GammaSchedule& sched, std::span<const double> ref_seq,
                          const AdjustParams& params);

struct BoundaryResult {
  GammaSchedule sched;
  bool changed = false;  ///< current differs from the pre-boundary sequence
  ClipStatus clip_status = ClipStatus::clipped;
};

/// Composes peak_clip and rate_adjust once per elapsed period. Saturation
/// (at_floor / at_ceiling) is a no-op for the values, but histories still
/// shift. Call exactly when k mod T == 0.
BoundaryResult on_period_boundary(const GammaSchedule& sched, bool flag,
                                  const AdjustParams& params);

}  // namespace opdyn::sched
