#include "aff/sfc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aff {

CurveKind curve_from_string(const std::string& name) {
  if (name == "scanline") return CurveKind::Scanline;
  if (name == "peano") return CurveKind::Peano;
  if (name == "hilbert") return CurveKind::Hilbert;
  throw std::invalid_argument("unknown curve kind: " + name);
}

std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::Scanline: return "scanline";
    case CurveKind::Peano: return "peano";
    case CurveKind::Hilbert: return "hilbert";
  }
  return "?";
}

std::string AnchorOrdering::to_json() const {
  std::string out = "[";
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(order[i]);
  }
  out += "]";
  return out;
}

Extent bounding_box(const std::vector<Vec2>& positions) {
  check(!positions.empty(), "bounding_box: empty position set");
  Extent e{{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()},
           {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()}};
  for (const Vec2& p : positions) {
    e.min.x = std::min(e.min.x, p.x);
    e.min.y = std::min(e.min.y, p.y);
    e.max.x = std::max(e.max.x, p.x);
    e.max.y = std::max(e.max.y, p.y);
  }
  return e;
}

AnchorGrid build_anchor_grid(const Extent& bbox, std::int64_t k) {
  check(k >= 1, "build_anchor_grid: target cluster count must be >= 1");
  const double w = bbox.width();
  const double h = bbox.height();
  check(w > 0.0 && h > 0.0, "empty extent");

  std::int64_t rows = static_cast<std::int64_t>(std::llround(std::sqrt(double(k) * h / w)));
  rows = std::clamp<std::int64_t>(rows, 1, k);
  const std::int64_t cols = (k + rows - 1) / rows;

  AnchorGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.cell_width = w / double(cols);
  grid.cell_height = h / double(rows);
  grid.origin = bbox.min;
  grid.anchors.reserve(static_cast<std::size_t>(rows * cols));
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      grid.anchors.push_back({bbox.min.x + (double(c) + 0.5) * grid.cell_width,
                              bbox.min.y + (double(r) + 0.5) * grid.cell_height});
  return grid;
}

AnchorOrdering order_scanline(const AnchorGrid& grid) {
  AnchorOrdering o;
  o.kind = CurveKind::Scanline;
  o.order.reserve(static_cast<std::size_t>(grid.cell_count()));
  for (std::int64_t r = 0; r < grid.rows; ++r) {
    if (r % 2 == 0) {
      for (std::int64_t c = 0; c < grid.cols; ++c) o.order.push_back(r * grid.cols + c);
    } else {
      for (std::int64_t c = grid.cols - 1; c >= 0; --c) o.order.push_back(r * grid.cols + c);
    }
  }
  return o;
}

namespace {

int sgn(std::int64_t v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

// Generalized Hilbert traversal of a w x h block starting at (x, y), with
// major axis (ax, ay) and minor axis (bx, by). Recursion keeps consecutive
// cells adjacent on even-sided blocks; on power-of-two squares this is the
// classic Hilbert curve.
void hilbert_cells(std::int64_t x, std::int64_t y, std::int64_t ax, std::int64_t ay,
                   std::int64_t bx, std::int64_t by,
                   std::vector<std::pair<std::int64_t, std::int64_t>>& out) {
  const std::int64_t w = std::abs(ax + ay);
  const std::int64_t h = std::abs(bx + by);
  const std::int64_t dax = sgn(ax), day = sgn(ay);
  const std::int64_t dbx = sgn(bx), dby = sgn(by);
  if (h == 1) {
    for (std::int64_t i = 0; i < w; ++i) {
      out.push_back({x, y});
      x += dax;
      y += day;
    }
    return;
  }
  if (w == 1) {
    for (std::int64_t i = 0; i < h; ++i) {
      out.push_back({x, y});
      x += dbx;
      y += dby;
    }
    return;
  }
  std::int64_t ax2 = ax / 2, ay2 = ay / 2, bx2 = bx / 2, by2 = by / 2;
  const std::int64_t w2 = std::abs(ax2 + ay2);
  const std::int64_t h2 = std::abs(bx2 + by2);
  if (2 * w > 3 * h) {
    if ((w2 % 2) && w > 2) {
      ax2 += dax;
      ay2 += day;
    }
    hilbert_cells(x, y, ax2, ay2, bx, by, out);
    hilbert_cells(x + ax2, y + ay2, ax - ax2, ay - ay2, bx, by, out);
  } else {
    if ((h2 % 2) && h > 2) {
      bx2 += dbx;
      by2 += dby;
    }
    hilbert_cells(x, y, bx2, by2, ax2, ay2, out);
    hilbert_cells(x + bx2, y + by2, ax, ay, bx - bx2, by - by2, out);
    hilbert_cells(x + (ax - dax) + (bx2 - dbx), y + (ay - day) + (by2 - dby), -bx2, -by2,
                  -(ax - ax2), -(ay - ay2), out);
  }
}

// Peano visit order of an n x n grid, n a power of three. Sub-squares are
// reflected so the curve stays connected.
void peano_cells(std::int64_t n, std::vector<std::pair<std::int64_t, std::int64_t>>& out) {
  if (n == 1) {
    out.push_back({0, 0});
    return;
  }
  const std::int64_t m = n / 3;
  std::vector<std::pair<std::int64_t, std::int64_t>> sub;
  peano_cells(m, sub);
  static const int motif[9][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 2}, {1, 1},
                                  {1, 0}, {2, 0}, {2, 1}, {2, 2}};
  for (const auto& b : motif) {
    const std::int64_t bx = b[0], by = b[1];
    const bool fx = (by % 2 == 1);
    const bool fy = (bx % 2 == 1);
    for (const auto& c : sub) {
      const std::int64_t lx = fx ? m - 1 - c.first : c.first;
      const std::int64_t ly = fy ? m - 1 - c.second : c.second;
      out.push_back({bx * m + lx, by * m + ly});
    }
  }
}

}  // namespace

AnchorOrdering order_hilbert(const AnchorGrid& grid) {
  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  cells.reserve(static_cast<std::size_t>(grid.cell_count()));
  if (grid.cols >= grid.rows)
    hilbert_cells(0, 0, grid.cols, 0, 0, grid.rows, cells);
  else
    hilbert_cells(0, 0, 0, grid.rows, grid.cols, 0, cells);
  AnchorOrdering o;
  o.kind = CurveKind::Hilbert;
  o.order.reserve(cells.size());
  for (const auto& [x, y] : cells) o.order.push_back(y * grid.cols + x);
  return o;
}

AnchorOrdering order_peano(const AnchorGrid& grid) {
  std::int64_t n = 1;
  while (n < std::max(grid.rows, grid.cols)) n *= 3;
  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  cells.reserve(static_cast<std::size_t>(n * n));
  peano_cells(n, cells);
  AnchorOrdering o;
  o.kind = CurveKind::Peano;
  o.order.reserve(static_cast<std::size_t>(grid.cell_count()));
  for (const auto& [x, y] : cells)
    if (x < grid.cols && y < grid.rows) o.order.push_back(y * grid.cols + x);
  return o;
}

AnchorOrdering order_by_kind(const AnchorGrid& grid, CurveKind kind) {
  switch (kind) {
    case CurveKind::Scanline: return order_scanline(grid);
    case CurveKind::Peano: return order_peano(grid);
    case CurveKind::Hilbert: return order_hilbert(grid);
  }
  throw std::invalid_argument("order_by_kind: bad kind");
}

std::int64_t quantize(Vec2 p, const AnchorGrid& grid) {
  check(std::isfinite(p.x) && std::isfinite(p.y), "quantize: NaN coordinates");
  std::int64_t c = static_cast<std::int64_t>(std::floor((p.x - grid.origin.x) / grid.cell_width));
  std::int64_t r = static_cast<std::int64_t>(std::floor((p.y - grid.origin.y) / grid.cell_height));
  c = std::clamp<std::int64_t>(c, 0, grid.cols - 1);
  r = std::clamp<std::int64_t>(r, 0, grid.rows - 1);
  return r * grid.cols + c;
}

}  // namespace aff
