#include "opdyn/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opdyn::sched {

void AdjustParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0,1]");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidConfig("beta must lie in [0,1)");
  if (!(delta > 0.0)) throw InvalidConfig("delta must be positive");
}

GammaSchedule GammaSchedule::create(int T, std::vector<double> initial,
                                    std::vector<double> levels, std::vector<double> lower,
                                    std::vector<double> upper) {
  GammaSchedule s;
  s.T = T;
  s.levels = std::move(levels);
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  if (T < 1) throw InvalidConfig("period length must be at least 1");
  if (static_cast<int>(initial.size()) != T || s.lower.size() != initial.size() ||
      s.upper.size() != initial.size())
    throw InvalidConfig("initial sequence and bounds must have length T");
  s.current.resize(T);
  for (int t = 0; t < T; ++t) {
    if (s.lower[t] > s.upper[t]) throw InvalidConfig("lower bound exceeds upper bound");
    s.current[t] = std::min(s.upper[t], std::max(s.lower[t], initial[t]));
  }
  s.prev = s.current;
  s.prev2 = s.current;
  s.validate();
  return s;
}

GammaSchedule GammaSchedule::constant(double gamma) {
  return create(1, {gamma}, {gamma}, {gamma}, {gamma});
}

void GammaSchedule::validate() const {
  if (T < 1) throw InvalidConfig("period length must be at least 1");
  auto check_seq = [this](const std::vector<double>& seq, const char* name) {
    if (static_cast<int>(seq.size()) != T)
      throw InvalidConfig(std::string(name) + " must have length T");
    for (double g : seq)
      if (!(g > 0.0 && g < 1.0))
        throw InvalidConfig(std::string(name) + " entries must lie in (0,1)");
  };
  check_seq(current, "current");
  check_seq(prev, "prev");
  check_seq(prev2, "prev2");
  check_seq(lower, "lower bounds");
  check_seq(upper, "upper bounds");
  if (levels.empty()) throw InvalidConfig("level grid must be non-empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0))
      throw InvalidConfig("levels must lie in (0,1)");
    if (i > 0 && !(levels[i] > levels[i - 1]))
      throw InvalidConfig("levels must be strictly increasing");
  }
  for (int t = 0; t < T; ++t)
    if (current[t] < lower[t] || current[t] > upper[t])
      throw InvalidConfig("current sequence violates its bounds");
}

int phase_index(long k, int T) {
  long r = (k - 1) % T;
  if (r < 0) r += T;
  return static_cast<int>(r);
}

double gamma_at(const GammaSchedule& sched, long k) {
  return sched.current[phase_index(k, sched.T)];
}

ClipResult peak_clip(std::span<const double> seq, std::span<const double> levels, bool flag) {
  if (seq.empty()) throw InvalidConfig("cannot clip an empty sequence");
  if (levels.empty()) throw InvalidConfig("level grid must be non-empty");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw InvalidConfig("levels must be strictly increasing");
  const double f_min = levels.front();
  const double f_max = levels.back();
  const double gamma_max = *std::max_element(seq.begin(), seq.end());
  for (double g : seq)
    if (g < f_min || g > f_max)
      throw InvalidConfig("sequence entries must lie within [f_min, f_max]");

  ClipResult out;
  out.seq.assign(seq.begin(), seq.end());

  double replacement = 0.0;
  if (flag) {
    // largest level strictly below the peak
    bool found = false;
    for (double l : levels) {
      if (l < gamma_max) {
        replacement = l;
        found = true;
      }
    }
    if (!found) {
      out.status = ClipStatus::at_floor;
      return out;
    }
  } else {
    // smallest level strictly above the peak
    bool found = false;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      if (*it > gamma_max) {
        replacement = *it;
        found = true;
      }
    }
    if (!found) {
      out.status = ClipStatus::at_ceiling;
      return out;
    }
  }
  for (double& g : out.seq)
    if (g == gamma_max) g = replacement;
  out.status = ClipStatus::clipped;
  return out;
}

double blend(double v, double ref, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0,1]");
  return (1.0 - lambda) * v + lambda * ref;
}

GammaSchedule rate_adjust(const GammaSchedule& sched, std::span<const double> ref_seq,
                          const AdjustParams& params) {
  for (int t = 0; t < sched.T; ++t)
    if (sched.lower[t] > sched.upper[t])
      throw InfeasibleBounds("lower bound exceeds upper bound at phase " + std::to_string(t + 1));
  sched.validate();
  params.validate();
  if (static_cast<int>(ref_seq.size()) != sched.T)
    throw LengthMismatch("reference sequence must have length T");

  GammaSchedule out = sched;
  out.prev2 = sched.prev;
  out.prev = sched.current;
  for (int t = 0; t < sched.T; ++t) {
    const double ref = ref_seq[t];
    // The clipped reference is flat across the peak, so with per-phase caps it
    // can exceed some of them; the admissible interval wins, which is what
    // lets an ascending sequence retrace its original shape instead of
    // flattening at the top level.
    const double lo = std::max(sched.lower[t], std::min(ref, sched.upper[t]));
    const double hi = sched.upper[t];
    const double v = sched.prev[t] + params.beta * (sched.prev[t] - sched.prev2[t]);
    const double u_blend = blend(v, ref, params.lambda);
    // Trust-region clip written so that an in-radius move passes through
    // without re-rounding (v + (u - v) need not equal u in floating point).
    const double move = u_blend - v;
    double u = u_blend;
    if (move > params.delta) u = v + params.delta;
    if (move < -params.delta) u = v - params.delta;
    u = std::min(hi, std::max(lo, u));
    // Monotone clamp; the admissible interval wins on conflict.
    u = sched.flag ? std::min(u, v) : std::max(u, v);
    u = std::min(hi, std::max(lo, u));
    out.current[t] = u;
  }
  out.validate();
  return out;
}

BoundaryResult on_period_boundary(const GammaSchedule& sched, bool flag,
                                  const AdjustParams& params) {
  GammaSchedule armed = sched;
  armed.flag = flag;
  const ClipResult clip = peak_clip(armed.current, armed.levels, flag);

  BoundaryResult out;
  out.clip_status = clip.status;
  if (clip.status != ClipStatus::clipped) {
    // Saturated at the grid edge: values stay put, histories still shift.
    armed.prev2 = armed.prev;
    armed.prev = armed.current;
    out.sched = std::move(armed);
    out.changed = false;
    return out;
  }
  out.sched = rate_adjust(armed, clip.seq, params);
  out.changed = out.sched.current != sched.current;
  return out;
}

}  // namespace opdyn::sched
