#include "aff/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aff {

namespace {

constexpr double kEps = 1e-9;

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Partition N sorted tokens into k contiguous groups of size floor(N/k) or
// ceil(N/k), larger groups first.
ClusterAssignment partition_sorted(std::vector<std::int64_t> sorted, std::int64_t k) {
  const std::int64_t n = static_cast<std::int64_t>(sorted.size());
  ClusterAssignment a;
  a.sorted_order = std::move(sorted);
  a.cluster_count = k;
  a.cluster_of.assign(static_cast<std::size_t>(n), 0);
  const std::int64_t base = n / k;
  const std::int64_t rem = n % k;
  a.starts.assign(static_cast<std::size_t>(k + 1), 0);
  std::int64_t pos = 0;
  for (std::int64_t c = 0; c < k; ++c) {
    const std::int64_t sz = base + (c < rem ? 1 : 0);
    a.cluster_sizes.push_back(sz);
    a.starts[static_cast<std::size_t>(c)] = pos;
    for (std::int64_t i = 0; i < sz; ++i) a.cluster_of[static_cast<std::size_t>(a.sorted_order[static_cast<std::size_t>(pos + i)])] = c;
    pos += sz;
  }
  a.starts[static_cast<std::size_t>(k)] = n;
  return a;
}

// Expands zero-width/height extents so degenerate (collinear) token sets
// still get a usable grid.
Extent usable_extent(const std::vector<Vec2>& positions) {
  Extent e = bounding_box(positions);
  if (e.width() <= 0.0) {
    e.min.x -= 0.5;
    e.max.x += 0.5;
  }
  if (e.height() <= 0.0) {
    e.min.y -= 0.5;
    e.max.y += 0.5;
  }
  return e;
}

std::int64_t cluster_count_for(std::int64_t n, std::int64_t cluster_size) {
  return std::max<std::int64_t>(1, std::llround(double(n) / double(cluster_size)));
}

}  // namespace

double ratio_key(Vec2 p, Vec2 a_prev, Vec2 a_next) {
  return dist(p, a_prev) / (dist(p, a_next) + kEps);
}

ClusterAssignment balanced_cluster(const std::vector<Vec2>& positions,
                                   std::int64_t cluster_size, CurveKind curve) {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  check(n >= 1, "balanced_cluster: empty token set");
  check(cluster_size >= 1, "balanced_cluster: cluster_size must be >= 1");
  const std::int64_t k = cluster_count_for(n, cluster_size);

  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (k == 1) return partition_sorted(std::move(idx), 1);

  const AnchorGrid grid = build_anchor_grid(usable_extent(positions), k);
  const AnchorOrdering ordering = order_by_kind(grid, curve);

  // rank of each anchor along the curve
  std::vector<std::int64_t> rank(static_cast<std::size_t>(grid.cell_count()), 0);
  for (std::size_t r = 0; r < ordering.order.size(); ++r) rank[static_cast<std::size_t>(ordering.order[r])] = static_cast<std::int64_t>(r);

  struct Key {
    std::int64_t anchor_rank;
    double ratio;
  };
  std::vector<Key> keys(static_cast<std::size_t>(n));
  const std::int64_t last = static_cast<std::int64_t>(ordering.order.size()) - 1;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t cell = quantize(positions[static_cast<std::size_t>(i)], grid);
    const std::int64_t r = rank[static_cast<std::size_t>(cell)];
    // First/last anchors clamp to themselves.
    const Vec2 prev = grid.anchors[static_cast<std::size_t>(ordering.order[static_cast<std::size_t>(std::max<std::int64_t>(0, r - 1))])];
    const Vec2 next = grid.anchors[static_cast<std::size_t>(ordering.order[static_cast<std::size_t>(std::min<std::int64_t>(last, r + 1))])];
    keys[static_cast<std::size_t>(i)] = {r, ratio_key(positions[static_cast<std::size_t>(i)], prev, next)};
  }

  std::stable_sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) {
    const Key& ka = keys[static_cast<std::size_t>(a)];
    const Key& kb = keys[static_cast<std::size_t>(b)];
    if (ka.anchor_rank != kb.anchor_rank) return ka.anchor_rank < kb.anchor_rank;
    return ka.ratio < kb.ratio;
  });
  return partition_sorted(std::move(idx), k);
}

ClusterAssignment no_anchor_cluster(const std::vector<Vec2>& positions,
                                    std::int64_t cluster_size, CurveKind curve) {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  check(n >= 1, "no_anchor_cluster: empty token set");
  check(cluster_size >= 1, "no_anchor_cluster: cluster_size must be >= 1");
  const std::int64_t k = cluster_count_for(n, cluster_size);

  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (k == 1) return partition_sorted(std::move(idx), 1);

  // Fine grid with unit cells over the token extent.
  const Extent e = usable_extent(positions);
  AnchorGrid grid;
  grid.cols = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(e.width())));
  grid.rows = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(e.height())));
  grid.cell_width = e.width() / double(grid.cols);
  grid.cell_height = e.height() / double(grid.rows);
  grid.origin = e.min;

  const AnchorOrdering ordering = order_by_kind(grid, curve);
  std::vector<std::int64_t> rank(static_cast<std::size_t>(grid.cell_count()), 0);
  for (std::size_t r = 0; r < ordering.order.size(); ++r) rank[static_cast<std::size_t>(ordering.order[r])] = static_cast<std::int64_t>(r);

  std::vector<std::int64_t> key(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    key[static_cast<std::size_t>(i)] = rank[static_cast<std::size_t>(quantize(positions[static_cast<std::size_t>(i)], grid))];

  std::stable_sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) {
    return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
  });
  return partition_sorted(std::move(idx), k);
}

std::vector<Vec2> centroids(const std::vector<Vec2>& positions, const ClusterAssignment& a) {
  std::vector<Vec2> c(static_cast<std::size_t>(a.cluster_count), Vec2{0, 0});
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::int64_t cl = a.cluster_of[i];
    c[static_cast<std::size_t>(cl)].x += positions[i].x;
    c[static_cast<std::size_t>(cl)].y += positions[i].y;
  }
  for (std::int64_t cl = 0; cl < a.cluster_count; ++cl) {
    c[static_cast<std::size_t>(cl)].x /= double(a.cluster_sizes[static_cast<std::size_t>(cl)]);
    c[static_cast<std::size_t>(cl)].y /= double(a.cluster_sizes[static_cast<std::size_t>(cl)]);
  }
  return c;
}

double silhouette(const std::vector<Vec2>& positions, const ClusterAssignment& a) {
  check(a.cluster_count >= 2, "silhouette undefined");
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t own = a.cluster_of[static_cast<std::size_t>(i)];
    if (a.cluster_sizes[static_cast<std::size_t>(own)] <= 1) continue;  // contributes 0

    std::vector<double> mean_dist(static_cast<std::size_t>(a.cluster_count), 0.0);
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[static_cast<std::size_t>(a.cluster_of[static_cast<std::size_t>(j)])] +=
          dist(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
    }
    double ai = 0.0;
    double bi = std::numeric_limits<double>::max();
    for (std::int64_t c = 0; c < a.cluster_count; ++c) {
      const std::int64_t sz = a.cluster_sizes[static_cast<std::size_t>(c)];
      if (c == own) {
        ai = mean_dist[static_cast<std::size_t>(c)] / double(sz - 1);
      } else if (sz > 0) {
        bi = std::min(bi, mean_dist[static_cast<std::size_t>(c)] / double(sz));
      }
    }
    const double denom = std::max(ai, bi);
    if (denom > 0.0) total += (bi - ai) / denom;
  }
  return total / double(n);
}

}  // namespace aff
