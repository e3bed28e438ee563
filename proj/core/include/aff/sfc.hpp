#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aff/tensor.hpp"

namespace aff {

/// Coarse regular grid whose cell centers act as space-filling anchors.
struct AnchorGrid {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  double cell_width = 0.0;
  double cell_height = 0.0;
  Vec2 origin;                 // min corner of the covered extent
  std::vector<Vec2> anchors;   // row-major cell centers

  std::int64_t cell_count() const { return rows * cols; }
};

enum class CurveKind { Scanline, Peano, Hilbert };

CurveKind curve_from_string(const std::string& name);
std::string to_string(CurveKind kind);

/// 1D visit order over the anchors of a grid.
struct AnchorOrdering {
  std::vector<std::int64_t> order;  // permutation of [0, rows*cols)
  CurveKind kind = CurveKind::Scanline;

  std::string to_json() const;
};

struct Extent {
  Vec2 min;
  Vec2 max;
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

Extent bounding_box(const std::vector<Vec2>& positions);

/// Sizes a rows x cols grid over bbox so the cell count lands in
/// [target_cluster_count, 2*target_cluster_count).
AnchorGrid build_anchor_grid(const Extent& bbox, std::int64_t target_cluster_count);

/// Boustrophedon row sweep: even rows left to right, odd rows reversed.
AnchorOrdering order_scanline(const AnchorGrid& grid);

/// Hilbert order, generated natively on the grid rectangle. Power-of-two
/// squares yield the classic curve; other shapes stay cell-adjacent except
/// for rare diagonal steps on odd-sided blocks.
AnchorOrdering order_hilbert(const AnchorGrid& grid);

/// Peano order, on the smallest enclosing power-of-three square.
AnchorOrdering order_peano(const AnchorGrid& grid);

AnchorOrdering order_by_kind(const AnchorGrid& grid, CurveKind kind);

/// Row-major index of the cell containing `position`. Floor convention on
/// cell edges; positions outside the extent clamp to the border cell.
std::int64_t quantize(Vec2 position, const AnchorGrid& grid);

}  // namespace aff
