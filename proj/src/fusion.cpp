#include "opdyn/fusion.hpp"

#include <string>

namespace opdyn::fusion {

void SocialNorm::validate() const {
  if (!(r > 0.0)) throw InvalidConfig("social norm radius must be positive");
  if (eta.size() == 0) throw InvalidConfig("social norm center must be non-empty");
}

namespace {

void check_lists(const Opinion& x_i, std::span<const Opinion> xs, std::span<const double> ws) {
  if (xs.size() != ws.size())
    throw LengthMismatch("neighbor opinions and weights differ in length");
  for (const Opinion& x : xs)
    if (x.size() != x_i.size())
      throw DimensionMismatch("neighbor opinion dimension differs from the agent's");
}

}  // namespace

Opinion boomerang_fuse(const Opinion& x_i, std::span<const Opinion> neighbor_opinions,
                       std::span<const double> weights) {
  check_lists(x_i, neighbor_opinions, weights);
  Opinion fused = x_i;
  for (std::size_t j = 0; j < neighbor_opinions.size(); ++j)
    fused -= weights[j] * (neighbor_opinions[j] - x_i);
  return fused;
}

Opinion averaging_fuse(const Opinion& x_i, std::span<const Opinion> neighbor_opinions,
                       std::span<const double> weights) {
  check_lists(x_i, neighbor_opinions, weights);
  Opinion fused = x_i;
  for (std::size_t j = 0; j < neighbor_opinions.size(); ++j)
    fused += weights[j] * (neighbor_opinions[j] - x_i);
  return fused;
}

Opinion stubborn_fuse(const Opinion& x_i) { return x_i; }

Opinion counterfactual_fuse(const Opinion& x_i, std::span<const NeighborOpinion> neighbors,
                            const std::map<int, Opinion>& refs) {
  std::vector<Opinion> xs;
  std::vector<double> ws;
  xs.reserve(neighbors.size());
  ws.reserve(neighbors.size());
  for (const NeighborOpinion& nb : neighbors) {
    if (nb.malicious) {
      auto it = refs.find(nb.id);
      if (it == refs.end())
        throw MissingReference("no reference opinion for malicious neighbor " +
                               std::to_string(nb.id));
      xs.push_back(it->second);
    } else {
      xs.push_back(nb.x);
    }
    ws.push_back(nb.weight);
  }
  return boomerang_fuse(x_i, xs, ws);
}

bool in_norm_range(const Opinion& x, const SocialNorm& norm) {
  if (x.size() != norm.eta.size())
    throw DimensionMismatch("opinion dimension differs from the norm center's");
  return (x - norm.eta).norm() <= norm.r;
}

}  // namespace opdyn::fusion
