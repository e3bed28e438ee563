#pragma once

#include <cstdint>
#include <vector>

#include "aff/sfc.hpp"
#include "aff/tensor.hpp"

namespace aff {

/// Balanced partition of a token set. Tokens of one cluster are contiguous
/// in sorted_order; cluster sizes differ by at most one.
struct ClusterAssignment {
  std::vector<std::int64_t> sorted_order;   // permutation of [0, N)
  std::vector<std::int64_t> cluster_of;     // N entries
  std::int64_t cluster_count = 0;
  std::vector<std::int64_t> cluster_sizes;  // k entries

  // Offsets into sorted_order: cluster c spans [starts[c], starts[c+1]).
  std::vector<std::int64_t> starts;
};

/// Ratio of the distance to the previous anchor over the distance to the
/// next anchor (epsilon-guarded).
double ratio_key(Vec2 p, Vec2 a_prev, Vec2 a_next);

ClusterAssignment balanced_cluster(const std::vector<Vec2>& positions,
                                   std::int64_t cluster_size, CurveKind curve);

/// Ablation variant: the curve is applied directly to unit cells of the
/// token lattice, no anchors, no ratio ordering.
ClusterAssignment no_anchor_cluster(const std::vector<Vec2>& positions,
                                    std::int64_t cluster_size, CurveKind curve);

std::vector<Vec2> centroids(const std::vector<Vec2>& positions,
                            const ClusterAssignment& assignment);

/// Mean silhouette coefficient in [-1, 1]; singleton clusters contribute 0.
double silhouette(const std::vector<Vec2>& positions, const ClusterAssignment& assignment);

template <class Real>
ClusterAssignment balanced_cluster(const TokenSet<Real>& tokens, std::int64_t cluster_size,
                                   CurveKind curve) {
  return balanced_cluster(tokens.positions, cluster_size, curve);
}

template <class Real>
ClusterAssignment no_anchor_cluster(const TokenSet<Real>& tokens, std::int64_t cluster_size,
                                    CurveKind curve) {
  return no_anchor_cluster(tokens.positions, cluster_size, curve);
}

}  // namespace aff
