#include "aff/downsample.hpp"

namespace aff {

std::vector<std::int64_t> local_stride(const std::vector<Vec2>& positions) {
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  check(n >= 2, "local_stride: need at least 2 tokens");
  std::vector<std::int64_t> t(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::max();
    for (std::int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::abs(positions[static_cast<std::size_t>(i)].x - positions[static_cast<std::size_t>(j)].x) +
                       std::abs(positions[static_cast<std::size_t>(i)].y - positions[static_cast<std::size_t>(j)].y);
      best = std::min(best, d);
    }
    check(best > 0.0, "local_stride: duplicate positions");
    std::int64_t p = 1;
    while (double(p) < best - 1e-9) p *= 2;
    t[static_cast<std::size_t>(i)] = p;
  }
  return t;
}

GridPrior grid_prior(const std::vector<Vec2>& positions, int stage_index) {
  check(stage_index >= 1, "grid_prior: stage index must be >= 1");
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  GridPrior prior;
  prior.stride = local_stride(positions);
  prior.g.resize(static_cast<std::size_t>(n));
  prior.reserved.resize(static_cast<std::size_t>(n));

  const std::int64_t reserve_mod = std::int64_t(1) << (stage_index + 1);
  for (std::int64_t i = 0; i < n; ++i) {
    const double fx = positions[static_cast<std::size_t>(i)].x;
    const double fy = positions[static_cast<std::size_t>(i)].y;
    const std::int64_t x = std::llround(fx);
    const std::int64_t y = std::llround(fy);
    check(std::abs(fx - double(x)) < 1e-9 && std::abs(fy - double(y)) < 1e-9,
          "grid_prior: positions must lie on the integer lattice");
    const std::int64_t m = 2 * prior.stride[static_cast<std::size_t>(i)];
    prior.g[static_cast<std::size_t>(i)] = (((x % m) + m) % m == 0 && ((y % m) + m) % m == 0) ? 1 : 0;
    prior.reserved[static_cast<std::size_t>(i)] =
        (((x % reserve_mod) + reserve_mod) % reserve_mod == 0 &&
         ((y % reserve_mod) + reserve_mod) % reserve_mod == 0)
            ? 1
            : 0;
  }
  return prior;
}

std::vector<std::int64_t> select_centers(const GridPrior& prior, const std::vector<double>& scores,
                                         double alpha, double keep_fraction) {
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  check(static_cast<std::int64_t>(prior.g.size()) == n && static_cast<std::int64_t>(prior.reserved.size()) == n,
        "select_centers: prior/score length mismatch");
  std::int64_t m = std::max<std::int64_t>(1, std::llround(keep_fraction * double(n)));
  m = std::min(m, n);

  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) {
    const bool ra = prior.reserved[static_cast<std::size_t>(a)];
    const bool rb = prior.reserved[static_cast<std::size_t>(b)];
    if (ra != rb) return ra;  // reserved first (g = +inf)
    const double sa = double(prior.g[static_cast<std::size_t>(a)]) + alpha * scores[static_cast<std::size_t>(a)];
    const double sb = double(prior.g[static_cast<std::size_t>(b)]) + alpha * scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });

  std::int64_t reserved_count = 0;
  for (const char r : prior.reserved) reserved_count += r ? 1 : 0;
  m = std::max(m, reserved_count);  // reserved overflow grows the quota

  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace aff
