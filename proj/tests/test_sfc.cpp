#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aff/sfc.hpp"

using namespace aff;

namespace {

AnchorGrid unit_grid(std::int64_t rows, std::int64_t cols) {
  AnchorGrid g;
  g.rows = rows;
  g.cols = cols;
  g.cell_width = 1.0;
  g.cell_height = 1.0;
  g.origin = {0.0, 0.0};
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) g.anchors.push_back({c + 0.5, r + 0.5});
  return g;
}

bool is_permutation_of_cells(const AnchorOrdering& o, std::int64_t n) {
  if (static_cast<std::int64_t>(o.order.size()) != n) return false;
  std::set<std::int64_t> seen(o.order.begin(), o.order.end());
  return static_cast<std::int64_t>(seen.size()) == n && *seen.begin() == 0 &&
         *seen.rbegin() == n - 1;
}

std::int64_t l1_step(std::int64_t a, std::int64_t b, std::int64_t cols) {
  return std::abs(a % cols - b % cols) + std::abs(a / cols - b / cols);
}

bool all_steps_adjacent(const AnchorOrdering& o, std::int64_t cols) {
  for (std::size_t i = 1; i < o.order.size(); ++i)
    if (l1_step(o.order[i - 1], o.order[i], cols) != 1) return false;
  return true;
}

}  // namespace

TEST_SUITE("sfc") {

TEST_CASE("bounding box spans the extremes") {
  const Extent e = bounding_box({{3, -1}, {-2, 5}, {0, 0}});
  CHECK(e.min.x == -2);
  CHECK(e.min.y == -1);
  CHECK(e.max.x == 3);
  CHECK(e.max.y == 5);
  CHECK_THROWS(bounding_box({}));
}

TEST_CASE("anchor grid sizing on a square extent") {
  // 56x56 unit lattice: bbox 55x55, 392 clusters -> 20x20 cells.
  const AnchorGrid g = build_anchor_grid({{0, 0}, {55, 55}}, 392);
  CHECK(g.rows == 20);
  CHECK(g.cols == 20);
  CHECK(g.cell_count() >= 392);
  CHECK(g.cell_count() < 2 * 392);
}

TEST_CASE("anchor grid single cell sits at the extent center") {
  const AnchorGrid g = build_anchor_grid({{0, 0}, {7, 7}}, 1);
  CHECK(g.rows == 1);
  CHECK(g.cols == 1);
  REQUIRE(g.anchors.size() == 1);
  CHECK(g.anchors[0].x == doctest::Approx(3.5));
  CHECK(g.anchors[0].y == doctest::Approx(3.5));
}

TEST_CASE("anchor grid respects aspect ratio") {
  // Extent twice as wide as tall, 8 cells -> 2 rows x 4 cols.
  const AnchorGrid g = build_anchor_grid({{0, 0}, {16, 8}}, 8);
  CHECK(g.rows == 2);
  CHECK(g.cols == 4);
}

TEST_CASE("anchor grid rejects a degenerate extent") {
  CHECK_THROWS_WITH_AS(build_anchor_grid({{1, 0}, {1, 5}}, 4), "empty extent",
                       std::invalid_argument);
}

TEST_CASE("anchor grid cell count lands in the target band") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> kd(1, 100);
  std::uniform_real_distribution<double> side(0.5, 40.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t k = kd(rng);
    const AnchorGrid g = build_anchor_grid({{0, 0}, {side(rng), side(rng)}}, k);
    CHECK(g.cell_count() >= k);
    CHECK(g.cell_count() < 2 * k);
  }
}

TEST_CASE("scanline order serpentines") {
  CHECK(order_scanline(unit_grid(2, 2)).order == std::vector<std::int64_t>{0, 1, 3, 2});
  CHECK(order_scanline(unit_grid(4, 1)).order == std::vector<std::int64_t>{0, 1, 2, 3});
  CHECK(order_scanline(unit_grid(3, 3)).order ==
        std::vector<std::int64_t>{0, 1, 2, 5, 4, 3, 6, 7, 8});
}

TEST_CASE("scanline order is cell adjacent on any grid") {
  for (std::int64_t r = 1; r <= 6; ++r)
    for (std::int64_t c = 1; c <= 6; ++c) {
      const AnchorOrdering o = order_scanline(unit_grid(r, c));
      CHECK(is_permutation_of_cells(o, r * c));
      CHECK(all_steps_adjacent(o, c));
    }
}

TEST_CASE("hilbert 2x2 is the U motif") {
  const AnchorOrdering o = order_hilbert(unit_grid(2, 2));
  // (0,0) -> (0,1) -> (1,1) -> (1,0) as row-major indices.
  CHECK(o.order == std::vector<std::int64_t>{0, 2, 3, 1});
}

TEST_CASE("hilbert is cell adjacent on power-of-two squares") {
  for (const std::int64_t n : {2, 4, 8, 16}) {
    const AnchorOrdering o = order_hilbert(unit_grid(n, n));
    CHECK(is_permutation_of_cells(o, n * n));
    CHECK(all_steps_adjacent(o, n));
  }
}

TEST_CASE("hilbert covers odd and rectangular grids exactly once") {
  for (const auto [r, c] : {std::pair<std::int64_t, std::int64_t>{3, 3}, {5, 7}, {1, 9}, {6, 2}})
    CHECK(is_permutation_of_cells(order_hilbert(unit_grid(r, c)), r * c));
}

TEST_CASE("peano 3x3 follows the vertical serpentine motif") {
  const AnchorOrdering o = order_peano(unit_grid(3, 3));
  CHECK(o.order == std::vector<std::int64_t>{0, 3, 6, 7, 4, 1, 2, 5, 8});
  CHECK(all_steps_adjacent(o, 3));
}

TEST_CASE("peano 9x9 is a cell-adjacent bijection") {
  const AnchorOrdering o = order_peano(unit_grid(9, 9));
  CHECK(is_permutation_of_cells(o, 81));
  CHECK(all_steps_adjacent(o, 9));
}

TEST_CASE("peano handles trivial and clipped grids") {
  CHECK(order_peano(unit_grid(1, 1)).order == std::vector<std::int64_t>{0});
  CHECK(is_permutation_of_cells(order_peano(unit_grid(4, 5)), 20));
}

TEST_CASE("all three curves are bijections on every grid up to 16x16") {
  for (std::int64_t r = 1; r <= 16; ++r)
    for (std::int64_t c = 1; c <= 16; ++c) {
      const AnchorGrid g = unit_grid(r, c);
      for (const CurveKind k : {CurveKind::Scanline, CurveKind::Peano, CurveKind::Hilbert})
        CHECK(is_permutation_of_cells(order_by_kind(g, k), r * c));
    }
}

TEST_CASE("quantize maps anchors to their own cells") {
  const AnchorGrid g = unit_grid(4, 5);
  for (std::size_t i = 0; i < g.anchors.size(); ++i)
    CHECK(quantize(g.anchors[i], g) == static_cast<std::int64_t>(i));
}

TEST_CASE("quantize uses the floor convention on shared edges") {
  const AnchorGrid g = unit_grid(2, 2);
  // x = 1 lies on the edge between columns 0 and 1; floor puts it in column 1.
  CHECK(quantize({1.0, 0.5}, g) == 1);
  CHECK(quantize({0.5, 1.0}, g) == 2);
}

TEST_CASE("quantize clamps outside positions to border cells") {
  const AnchorGrid g = unit_grid(3, 3);
  CHECK(quantize({-5.0, -5.0}, g) == 0);
  CHECK(quantize({99.0, 99.0}, g) == 8);
}

TEST_CASE("quantize rejects NaN") {
  const AnchorGrid g = unit_grid(2, 2);
  CHECK_THROWS_AS(quantize({std::nan(""), 0.0}, g), std::invalid_argument);
}

TEST_CASE("curve names round-trip") {
  for (const CurveKind k : {CurveKind::Scanline, CurveKind::Peano, CurveKind::Hilbert})
    CHECK(curve_from_string(to_string(k)) == k);
  CHECK_THROWS(curve_from_string("zigzag"));
}

TEST_CASE("ordering serializes as a JSON array") {
  AnchorOrdering o;
  o.order = {0, 2, 1};
  CHECK(o.to_json() == "[0,2,1]");
}

}  // TEST_SUITE
