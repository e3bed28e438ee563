#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "aff/clustering.hpp"
#include "aff/tensor.hpp"

namespace aff {

/// Expand a relative position to (dx, dy, distance, cos, sin).
std::array<double, 5> expand_rel(Vec2 delta);

/// Fixed-width neighbor lists: one row of M = R * max-cluster-size token
/// indices per token, nearest cluster first. Rows shorter than M (cluster
/// sizes differing by one) repeat the last valid neighbor.
struct NeighborTable {
  std::int64_t token_count = 0;
  std::int64_t width = 0;                    // M
  std::vector<std::int64_t> indices;         // N * M
  std::vector<std::array<double, 5>> rel_pos;  // N * M, expand_rel(p_token - p_neighbor)

  std::int64_t neighbor(std::int64_t token, std::int64_t slot) const {
    return indices[static_cast<std::size_t>(token * width + slot)];
  }
};

/// Ids of the R clusters with centroids nearest to `query`, ascending by
/// distance, ties to the lower id.
std::vector<std::int64_t> nearest_clusters(Vec2 query, const std::vector<Vec2>& cluster_centroids,
                                           std::int64_t R);

NeighborTable build_neighbor_table(const std::vector<Vec2>& positions,
                                   const ClusterAssignment& assignment, std::int64_t R);

/// Neighborhood = all tokens, in index order (last-stage global attention).
NeighborTable full_neighbor_table(const std::vector<Vec2>& positions);

/// Inverse-distance-weighted interpolation of the k nearest source features.
template <class Real>
std::vector<Real> shepard_interpolate(Vec2 query, const TokenSet<Real>& sources,
                                      std::int64_t k = 4, double power = 6.0);

}  // namespace aff
