#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "aff/autodiff.hpp"
#include "aff/neighborhood.hpp"
#include "aff/params.hpp"

namespace aff {

/// Adaptive grid prior: per-token local stride, alternating-grid flag and
/// the reserved (always-survives) flag.
struct GridPrior {
  std::vector<std::int64_t> stride;  // t_i, powers of two
  std::vector<int> g;                // 0/1
  std::vector<char> reserved;        // treated as g = +inf in selection
};

/// Registers score layer l, weight net W (5 -> C_mid with layer norm and
/// GELU, C_mid = 4) and the bias-free projection U ((C_mid*C) -> C').
/// l starts at zero so initial scores are uniformly 0.5.
template <class Real>
void register_downsample(ParamStore<Real>& ps, const std::string& prefix, std::int64_t C,
                         std::int64_t C_out, std::int64_t c_mid = 4) {
  ps.add_constant(prefix + ".score.norm.gain", 1, C, Real(1));
  ps.add_constant(prefix + ".score.norm.offset", 1, C, Real(0));
  ps.add_constant(prefix + ".score.w", C, 1, Real(0));
  ps.add_constant(prefix + ".score.b", 1, 1, Real(0));
  ps.add_trunc_normal(prefix + ".wnet.w", 5, c_mid);
  ps.add_constant(prefix + ".wnet.b", 1, c_mid, Real(0));
  ps.add_constant(prefix + ".wnet.norm.gain", 1, c_mid, Real(1));
  ps.add_constant(prefix + ".wnet.norm.offset", 1, c_mid, Real(0));
  ps.add_trunc_normal(prefix + ".u", c_mid * C, C_out);
}

/// s = sigmoid(l(norm(f))), one scalar per token. The layer norm bounds the
/// logit by the score weight's norm; raw features can reach magnitudes that
/// saturate the sigmoid to exact 0/1 in 32-bit, killing the gradient.
template <class Real>
typename Graph<Real>::Id importance_scores(Graph<Real>& g, GraphBinding<Real>& bind,
                                           const std::string& prefix,
                                           typename Graph<Real>::Id features) {
  const auto fn = g.layer_norm(features, bind.use(prefix + ".score.norm.gain"),
                               bind.use(prefix + ".score.norm.offset"));
  const auto z = g.add_rowvec(g.matmul(fn, bind.use(prefix + ".score.w")),
                              bind.use(prefix + ".score.b"));
  return g.sigmoid(z);
}

/// L1 nearest-neighbor distance per token, rounded up to the next power of
/// two (exact powers map to themselves).
std::vector<std::int64_t> local_stride(const std::vector<Vec2>& positions);

GridPrior grid_prior(const std::vector<Vec2>& positions, int stage_index);

/// Top-round(keep_fraction*N) token indices by (reserved, g + alpha*s),
/// ties to the lower index. All reserved tokens survive even if they
/// exceed the quota. Returned ascending.
std::vector<std::int64_t> select_centers(const GridPrior& prior, const std::vector<double>& scores,
                                         double alpha, double keep_fraction);

/// Score-modulated neighborhood merge around each center:
///   f_merged(c) = vec( sum_i s_i * W(p_i - p_c) f_i^T ) U.
template <class Real>
typename Graph<Real>::Id merge_neighborhoods(Graph<Real>& g, GraphBinding<Real>& bind,
                                             const std::string& prefix,
                                             const std::vector<std::int64_t>& centers,
                                             const std::vector<Vec2>& positions,
                                             const NeighborTable& table,
                                             typename Graph<Real>::Id scores,
                                             typename Graph<Real>::Id features) {
  using Id = typename Graph<Real>::Id;
  const std::int64_t m = static_cast<std::int64_t>(centers.size());
  const std::int64_t w = table.width;
  const std::int64_t c_mid = bind.store().get(prefix + ".wnet.w").cols;

  Tensor<Real> rel(m * w, 5);
  std::vector<std::int64_t> flat(static_cast<std::size_t>(m * w));
  std::vector<std::int64_t> seg(static_cast<std::size_t>(m * w));
  for (std::int64_t ci = 0; ci < m; ++ci) {
    const std::int64_t c = centers[static_cast<std::size_t>(ci)];
    const Vec2 pc = positions[static_cast<std::size_t>(c)];
    for (std::int64_t j = 0; j < w; ++j) {
      const std::int64_t nb = table.neighbor(c, j);
      const auto e = expand_rel(positions[static_cast<std::size_t>(nb)] - pc);
      for (int q = 0; q < 5; ++q) rel(ci * w + j, q) = static_cast<Real>(e[static_cast<std::size_t>(q)]);
      flat[static_cast<std::size_t>(ci * w + j)] = nb;
      seg[static_cast<std::size_t>(ci * w + j)] = ci;
    }
  }

  const Id rel_id = g.leaf(std::move(rel));
  Id wmat = g.add_rowvec(g.matmul(rel_id, bind.use(prefix + ".wnet.w")), bind.use(prefix + ".wnet.b"));
  wmat = g.layer_norm(wmat, bind.use(prefix + ".wnet.norm.gain"), bind.use(prefix + ".wnet.norm.offset"));
  wmat = g.gelu(wmat);  // (m*w) x c_mid

  const Id sg = g.gather_rows(scores, flat);
  const Id fg = g.gather_rows(features, flat);
  const Id fs = g.scale_rows(fg, sg);  // s_i * f_i

  std::vector<Id> slabs;
  slabs.reserve(static_cast<std::size_t>(c_mid));
  for (std::int64_t a = 0; a < c_mid; ++a) {
    const Id wa = g.slice_cols(wmat, a, 1);
    slabs.push_back(g.segment_sum(g.scale_rows(fs, wa), seg, m));
  }
  const Id vec = g.concat_cols(slabs);  // m x (c_mid * C), row-major vec()
  return g.matmul(vec, bind.use(prefix + ".u"));
}

template <class Real>
struct DownsampleResult {
  std::vector<Vec2> positions;          // merged token positions (the centers)
  typename Graph<Real>::Id features;    // m x C'
  std::vector<std::int64_t> centers;    // selected token indices, ascending
  GridPrior prior;
  std::vector<double> score_values;     // forward s_i, for dumps
};

/// Full adaptive downsample: scores -> grid prior -> selection -> merge.
template <class Real>
DownsampleResult<Real> downsample(Graph<Real>& g, GraphBinding<Real>& bind,
                                  const std::string& prefix, const std::vector<Vec2>& positions,
                                  const NeighborTable& table, typename Graph<Real>::Id features,
                                  int stage_index, double alpha, double keep_fraction) {
  DownsampleResult<Real> res;
  const std::int64_t n = static_cast<std::int64_t>(positions.size());

  const auto scores = importance_scores(g, bind, prefix, features);
  res.score_values.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) res.score_values[static_cast<std::size_t>(i)] = double(g.value(scores)(i, 0));

  if (n == 1) {
    // A lone token is trivially its own merge center.
    res.prior.stride = {1};
    res.prior.g = {1};
    res.prior.reserved = {1};
    res.centers = {0};
  } else {
    res.prior = grid_prior(positions, stage_index);
    res.centers = select_centers(res.prior, res.score_values, alpha, keep_fraction);
  }

  res.features = merge_neighborhoods(g, bind, prefix, res.centers, positions, table, scores, features);
  res.positions.reserve(res.centers.size());
  for (const std::int64_t c : res.centers) res.positions.push_back(positions[static_cast<std::size_t>(c)]);
  return res;
}

}  // namespace aff
