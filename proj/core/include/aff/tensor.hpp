#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aff {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }

/// Dense row-major matrix. All network state is 2D; vectors are 1xC or Nx1.
template <class Real>
struct Tensor {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), Real(0)) {}

  Real& operator()(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  Real operator()(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }

  std::int64_t size() const { return rows * cols; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Irregular token set: 2D positions in stage-grid pixel units plus
/// per-token feature vectors.
template <class Real>
struct TokenSet {
  std::vector<Vec2> positions;
  Tensor<Real> features;  // N x C
  int stage_index = 1;

  std::int64_t count() const { return static_cast<std::int64_t>(positions.size()); }
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace aff
