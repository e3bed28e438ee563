#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aff/attention.hpp"
#include "aff/clustering.hpp"
#include "aff/downsample.hpp"

namespace aff {

struct StageConfig {
  int blocks = 1;
  int dim = 16;
  int heads = 1;
  int mlp_ratio = 2;
  int cluster_size = 8;
  int neighborhood_size = 24;
};

struct ModelConfig {
  std::vector<StageConfig> stages;
  double keep_fraction = 0.25;
  double alpha = 4.0;
  int num_classes = 2;
  int in_channels = 1;
  int global_last_stage_max_tokens = 64;
  CurveKind curve = CurveKind::Scanline;

  void validate() const;

  /// Desk-scale config: blocks 1,1,2,1; dims 16,32,64,96; heads 1,2,4,8.
  static ModelConfig aff_nano();
  /// Larger config: blocks 2,2,6,2; dims 32,128,256,384; heads 2,4,8,16.
  static ModelConfig aff_mini();

  static ModelConfig from_json_file(const std::string& path);
  static ModelConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// Per-stage record of the downsample decision, for dumps and overlays.
struct StageDump {
  int stage = 1;  // 1-based
  std::vector<Vec2> positions;
  std::vector<int> g;
  std::vector<double> s;
  std::vector<char> reserved;
  std::vector<char> selected;
};

template <class Real>
void register_model(ParamStore<Real>& ps, const ModelConfig& cfg) {
  cfg.validate();
  const int d0 = cfg.stages[0].dim;
  const int mid = std::max(4, d0 / 2);
  ps.add_trunc_normal("pe.conv1.w", 9 * cfg.in_channels, mid);
  ps.add_constant("pe.conv1.b", 1, mid, Real(0));
  ps.add_trunc_normal("pe.conv2.w", 9 * mid, d0);
  ps.add_constant("pe.conv2.b", 1, d0, Real(0));
  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    const StageConfig& sc = cfg.stages[s];
    for (int b = 0; b < sc.blocks; ++b)
      register_attention_block(ps, "s" + std::to_string(s) + ".b" + std::to_string(b), sc.dim,
                               sc.heads, sc.mlp_ratio);
    if (s + 1 < cfg.stages.size())
      register_downsample(ps, "down" + std::to_string(s), sc.dim, cfg.stages[s + 1].dim);
  }
  const int dl = cfg.stages.back().dim;
  ps.add_constant("final_norm.gain", 1, dl, Real(1));
  ps.add_constant("final_norm.offset", 1, dl, Real(0));
  ps.add_trunc_normal("head.w", dl, cfg.num_classes);
  ps.add_constant("head.b", 1, cfg.num_classes, Real(0));
}

namespace detail {

inline std::vector<std::int64_t> im2col_indices(int h, int w) {
  // 3x3 taps, stride 2, zero padding 1; -1 marks a padded tap.
  const int oh = h / 2, ow = w / 2;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(oh) * ow * 9);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ir = 2 * r + dy;
          const int ic = 2 * c + dx;
          idx.push_back((ir >= 0 && ir < h && ic >= 0 && ic < w) ? std::int64_t(ir) * w + ic : -1);
        }
  return idx;
}

}  // namespace detail

/// Two 3x3 stride-2 convolutions with GELU in between. Input pixels are a
/// (H*W) x C_in tensor; output tokens sit on the integer (H/4)x(W/4) lattice.
template <class Real>
typename Graph<Real>::Id patch_embed(Graph<Real>& g, GraphBinding<Real>& bind, int h, int w,
                                     typename Graph<Real>::Id pixels) {
  using Id = typename Graph<Real>::Id;
  check(h >= 8 && w >= 8 && h % 4 == 0 && w % 4 == 0,
        "patch_embed: image dims must be >= 8 and divisible by 4");
  const std::int64_t cin = g.value(pixels).cols;

  const auto idx1 = detail::im2col_indices(h, w);
  Id x = g.gather_rows(pixels, idx1);
  x = g.reshape(x, std::int64_t(h / 2) * (w / 2), 9 * cin);
  x = g.add_rowvec(g.matmul(x, bind.use("pe.conv1.w")), bind.use("pe.conv1.b"));
  x = g.gelu(x);

  const std::int64_t mid = g.value(x).cols;
  const auto idx2 = detail::im2col_indices(h / 2, w / 2);
  x = g.gather_rows(x, idx2);
  x = g.reshape(x, std::int64_t(h / 4) * (w / 4), 9 * mid);
  x = g.add_rowvec(g.matmul(x, bind.use("pe.conv2.w")), bind.use("pe.conv2.b"));
  return x;
}

inline std::vector<Vec2> lattice_positions(int rows, int cols) {
  std::vector<Vec2> p;
  p.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) p.push_back({double(c), double(r)});
  return p;
}

template <class Real>
struct StageResult {
  std::vector<Vec2> positions;
  typename Graph<Real>::Id features;
  StageDump dump;
};

/// One stage: a single clustering pass shared by all blocks, B transformer
/// blocks, then the adaptive downsample (skipped for the last stage).
template <class Real>
StageResult<Real> stage_forward(Graph<Real>& g, GraphBinding<Real>& bind, const ModelConfig& cfg,
                                int stage, const std::vector<Vec2>& positions,
                                typename Graph<Real>::Id x) {
  const StageConfig& sc = cfg.stages[static_cast<std::size_t>(stage)];
  const bool last = stage + 1 == static_cast<int>(cfg.stages.size());
  const std::int64_t n = static_cast<std::int64_t>(positions.size());
  const bool global = last && n <= cfg.global_last_stage_max_tokens;

  NeighborTable table;
  if (global) {
    table = full_neighbor_table(positions);
  } else {
    const ClusterAssignment assignment = balanced_cluster(positions, sc.cluster_size, cfg.curve);
    const std::int64_t r =
        std::min<std::int64_t>(std::max(1, sc.neighborhood_size / sc.cluster_size), assignment.cluster_count);
    table = build_neighbor_table(positions, assignment, r);
  }

  const std::string sp = "s" + std::to_string(stage);
  for (int b = 0; b < sc.blocks; ++b)
    x = transformer_block(g, bind, sp + ".b" + std::to_string(b), x, table, sc.heads);

  StageResult<Real> res;
  res.dump.stage = stage + 1;
  res.dump.positions = positions;
  if (last) {
    res.positions = positions;
    res.features = x;
    res.dump.g.assign(static_cast<std::size_t>(n), 0);
    res.dump.s.assign(static_cast<std::size_t>(n), 0.0);
    res.dump.reserved.assign(static_cast<std::size_t>(n), 0);
    res.dump.selected.assign(static_cast<std::size_t>(n), 1);
    return res;
  }

  DownsampleResult<Real> ds = downsample(g, bind, "down" + std::to_string(stage), positions, table,
                                         x, stage + 1, cfg.alpha, cfg.keep_fraction);
  res.dump.g = ds.prior.g;
  res.dump.s = ds.score_values;
  res.dump.reserved = ds.prior.reserved;
  res.dump.selected.assign(static_cast<std::size_t>(n), 0);
  for (const std::int64_t c : ds.centers) res.dump.selected[static_cast<std::size_t>(c)] = 1;
  res.positions = std::move(ds.positions);
  res.features = ds.features;
  return res;
}

template <class Real>
struct ForwardResult {
  typename Graph<Real>::Id logits;  // 1 x num_classes
  std::vector<StageDump> dumps;
  std::vector<Vec2> final_positions;
};

/// Full backbone + mean-pool classification head on one image. Pixels are
/// unit floats, row-major, (H*W) x C_in.
template <class Real>
ForwardResult<Real> classify(Graph<Real>& g, GraphBinding<Real>& bind, const ModelConfig& cfg,
                             int h, int w, typename Graph<Real>::Id pixels) {
  using Id = typename Graph<Real>::Id;
  Id x = patch_embed(g, bind, h, w, pixels);
  std::vector<Vec2> positions = lattice_positions(h / 4, w / 4);

  ForwardResult<Real> res;
  for (int s = 0; s < static_cast<int>(cfg.stages.size()); ++s) {
    StageResult<Real> sr = stage_forward(g, bind, cfg, s, positions, x);
    res.dumps.push_back(std::move(sr.dump));
    positions = std::move(sr.positions);
    x = sr.features;
  }
  res.final_positions = positions;

  x = g.layer_norm(x, bind.use("final_norm.gain"), bind.use("final_norm.offset"));
  const std::int64_t n = g.value(x).rows;
  std::vector<std::int64_t> seg(static_cast<std::size_t>(n), 0);
  Id pooled = g.scalar_scale(g.segment_sum(x, seg, 1), Real(1) / Real(n));
  res.logits = g.add_rowvec(g.matmul(pooled, bind.use("head.w")), bind.use("head.b"));
  return res;
}

}  // namespace aff
