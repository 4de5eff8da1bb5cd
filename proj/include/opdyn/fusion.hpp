#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <vector>

#include "opdyn/errors.hpp"

namespace opdyn::fusion {

using Opinion = Eigen::VectorXd;

/// Ball of radius r around eta in opinion space. Normal targets lie inside,
/// malicious targets outside.
struct SocialNorm {
  Eigen::VectorXd eta;
  double r = 0.0;

  void validate() const;
};

/// One neighbor as seen by the fusing agent.
struct NeighborOpinion {
  int id = -1;
  Opinion x;
  double weight = 0.0;
  bool malicious = false;
};

/// Repulsive fusion: x_i - sum_j w_ij (x_j - x_i). An empty neighbor list
/// returns x_i unchanged.
Opinion boomerang_fuse(const Opinion& x_i, std::span<const Opinion> neighbor_opinions,
                       std::span<const double> weights);

/// Conformist baseline: x_i + sum_j w_ij (x_j - x_i). Kept for comparison
/// runs only.
Opinion averaging_fuse(const Opinion& x_i, std::span<const Opinion> neighbor_opinions,
                       std::span<const double> weights);

/// Stubborn rule: the fused opinion is the agent's own opinion.
Opinion stubborn_fuse(const Opinion& x_i);

/// boomerang_fuse with every malicious neighbor's opinion replaced by its
/// reference from `refs` (keyed by agent id), same weights and neighbor set.
/// Throws MissingReference when a malicious neighbor has no entry.
Opinion counterfactual_fuse(const Opinion& x_i, std::span<const NeighborOpinion> neighbors,
                            const std::map<int, Opinion>& refs);

/// True iff ||x - eta|| <= r (boundary inclusive).
bool in_norm_range(const Opinion& x, const SocialNorm& norm);

}  // namespace opdyn::fusion
