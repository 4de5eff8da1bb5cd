#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "opdyn/costs.hpp"
#include "opdyn/scenario.hpp"

namespace opdyn::experiments {

/// Randomized deviation-bound suite: seeded instances of (K, R, weights,
/// in-budget deviation z) checked against the spectral and block-separable
/// bounds, plus a top-eigenvector instance per trial that must meet the
/// spectral bound near-exactly.
struct BoundTrialSummary {
  int trials = 0;
  int violations = 0;
  double worst_spectral_margin = 1.0;   ///< min over trials of 1 - dJ/spectral
  double worst_separable_margin = 1.0;  ///< min over trials of 1 - dJ/separable
  double worst_tightness_rel_err = 0.0;
};

BoundTrialSummary run_bound_trials(int trials, std::uint64_t seed);

/// A named schedule variant derived from a base config. `adaptive` is false
/// for fixed schedules (run them with adjustment disabled).
struct ScheduleVariant {
  std::string label;
  sim::ScenarioConfig config;
  bool adaptive = false;
};

/// Tokens: "time-varying" (adaptive), "periodN" (the initial sequence clipped
/// down N-1 times, frozen), "const:X" (constant rate X, frozen).
ScheduleVariant make_schedule_variant(const sim::ScenarioConfig& base, const std::string& token);

struct SweepRow {
  std::string label;
  costs::MetricsReport metrics;
};

std::string format_metrics_table(std::span<const SweepRow> rows);
void write_metrics_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace opdyn::experiments
