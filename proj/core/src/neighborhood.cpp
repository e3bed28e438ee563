#include "aff/neighborhood.hpp"

#include <algorithm>
#include <cmath>

namespace aff {

namespace {
constexpr double kEps = 1e-9;

double sqdist(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}
}  // namespace

std::array<double, 5> expand_rel(Vec2 delta) {
  const double d = std::hypot(delta.x, delta.y);
  const double dn = d + kEps;
  return {delta.x, delta.y, d, delta.x / dn, delta.y / dn};
}

std::vector<std::int64_t> nearest_clusters(Vec2 query, const std::vector<Vec2>& cents,
                                           std::int64_t R) {
  const std::int64_t k = static_cast<std::int64_t>(cents.size());
  check(R >= 1 && R <= k, "nearest_clusters: R must be in [1, cluster_count]");
  std::vector<std::int64_t> ids(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::partial_sort(ids.begin(), ids.begin() + R, ids.end(), [&](std::int64_t a, std::int64_t b) {
    const double da = sqdist(query, cents[static_cast<std::size_t>(a)]);
    const double db = sqdist(query, cents[static_cast<std::size_t>(b)]);
    if (da != db) return da < db;
    return a < b;
  });
  ids.resize(static_cast<std::size_t>(R));
  return ids;
}

NeighborTable build_neighbor_table(const std::vector<Vec2>& positions,
                                   const ClusterAssignment& a, std::int64_t R) {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  check(R >= 1 && R <= a.cluster_count, "build_neighbor_table: R must be in [1, cluster_count]");
  const std::int64_t max_sz = *std::max_element(a.cluster_sizes.begin(), a.cluster_sizes.end());
  const std::int64_t m = R * max_sz;

  const std::vector<Vec2> cents = centroids(positions, a);

  NeighborTable t;
  t.token_count = n;
  t.width = m;
  t.indices.resize(static_cast<std::size_t>(n * m));
  t.rel_pos.resize(static_cast<std::size_t>(n * m));

  for (std::int64_t i = 0; i < n; ++i) {
    const Vec2 p = positions[static_cast<std::size_t>(i)];
    std::vector<std::int64_t> near = nearest_clusters(p, cents, R);
    // The token's own cluster must be present; swap it in for the farthest
    // pick on the rare occasion centroid distances exclude it.
    const std::int64_t own = a.cluster_of[static_cast<std::size_t>(i)];
    if (std::find(near.begin(), near.end(), own) == near.end()) {
      near.back() = own;
      std::sort(near.begin(), near.end(), [&](std::int64_t x, std::int64_t y) {
        const double dx = sqdist(p, cents[static_cast<std::size_t>(x)]);
        const double dy = sqdist(p, cents[static_cast<std::size_t>(y)]);
        if (dx != dy) return dx < dy;
        return x < y;
      });
    }

    std::int64_t w = 0;
    for (const std::int64_t c : near) {
      for (std::int64_t s = a.starts[static_cast<std::size_t>(c)]; s < a.starts[static_cast<std::size_t>(c + 1)]; ++s)
        t.indices[static_cast<std::size_t>(i * m + w++)] = a.sorted_order[static_cast<std::size_t>(s)];
    }
    check(w >= 1, "build_neighbor_table: empty neighborhood");
    for (; w < m; ++w)  // pad by repeating the last valid neighbor
      t.indices[static_cast<std::size_t>(i * m + w)] = t.indices[static_cast<std::size_t>(i * m + w - 1)];

    for (std::int64_t s = 0; s < m; ++s) {
      const std::int64_t j = t.indices[static_cast<std::size_t>(i * m + s)];
      t.rel_pos[static_cast<std::size_t>(i * m + s)] = expand_rel(p - positions[static_cast<std::size_t>(j)]);
    }
  }
  return t;
}

NeighborTable full_neighbor_table(const std::vector<Vec2>& positions) {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  NeighborTable t;
  t.token_count = n;
  t.width = n;
  t.indices.resize(static_cast<std::size_t>(n * n));
  t.rel_pos.resize(static_cast<std::size_t>(n * n));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      t.indices[static_cast<std::size_t>(i * n + j)] = j;
      t.rel_pos[static_cast<std::size_t>(i * n + j)] =
          expand_rel(positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(j)]);
    }
  return t;
}

template <class Real>
std::vector<Real> shepard_interpolate(Vec2 query, const TokenSet<Real>& sources, std::int64_t k,
                                      double power) {
  const std::int64_t n = sources.count();
  check(n >= 1, "shepard_interpolate: empty source set");
  check(std::isfinite(power), "shepard_interpolate: power must be finite");
  k = std::min(k, n);

  std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](std::int64_t a, std::int64_t b) {
    const double da = sqdist(query, sources.positions[static_cast<std::size_t>(a)]);
    const double db = sqdist(query, sources.positions[static_cast<std::size_t>(b)]);
    if (da != db) return da < db;
    return a < b;
  });

  const std::int64_t c = sources.features.cols;
  std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
  double wsum = 0.0;
  for (std::int64_t s = 0; s < k; ++s) {
    const std::int64_t i = ids[static_cast<std::size_t>(s)];
    const double d = std::sqrt(sqdist(query, sources.positions[static_cast<std::size_t>(i)]));
    const double w = 1.0 / (std::pow(d, power) + kEps);
    wsum += w;
    for (std::int64_t f = 0; f < c; ++f) acc[static_cast<std::size_t>(f)] += w * double(sources.features(i, f));
  }
  std::vector<Real> out(static_cast<std::size_t>(c));
  for (std::int64_t f = 0; f < c; ++f) out[static_cast<std::size_t>(f)] = static_cast<Real>(acc[static_cast<std::size_t>(f)] / wsum);
  return out;
}

template std::vector<float> shepard_interpolate<float>(Vec2, const TokenSet<float>&, std::int64_t, double);
template std::vector<double> shepard_interpolate<double>(Vec2, const TokenSet<double>&, std::int64_t, double);

}  // namespace aff
