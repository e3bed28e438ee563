#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aff/autodiff.hpp"
#include "aff/neighborhood.hpp"
#include "aff/params.hpp"

namespace aff {

/// Registers one transformer block's parameters under `prefix.`:
/// q/k/v/o projections, the 5 -> H position-bias layer, the blank
/// key/value pair, two layer norms and the MLP.
template <class Real>
void register_attention_block(ParamStore<Real>& ps, const std::string& prefix, std::int64_t C,
                              std::int64_t H, std::int64_t mlp_ratio) {
  check(C % H == 0, "register_attention_block: head count must divide channels");
  ps.add_trunc_normal(prefix + ".attn.wq", C, C);
  ps.add_constant(prefix + ".attn.bq", 1, C, Real(0));
  ps.add_trunc_normal(prefix + ".attn.wk", C, C);
  ps.add_constant(prefix + ".attn.bk", 1, C, Real(0));
  ps.add_trunc_normal(prefix + ".attn.wv", C, C);
  ps.add_constant(prefix + ".attn.bv", 1, C, Real(0));
  ps.add_trunc_normal(prefix + ".attn.wo", C, C);
  ps.add_constant(prefix + ".attn.bo", 1, C, Real(0));
  ps.add_trunc_normal(prefix + ".attn.pos_w", 5, H);
  ps.add_constant(prefix + ".attn.pos_b", 1, H, Real(0));
  ps.add_trunc_normal(prefix + ".attn.blank_k", 1, C);
  ps.add_trunc_normal(prefix + ".attn.blank_v", 1, C);
  ps.add_constant(prefix + ".norm1.gain", 1, C, Real(1));
  ps.add_constant(prefix + ".norm1.offset", 1, C, Real(0));
  ps.add_constant(prefix + ".norm2.gain", 1, C, Real(1));
  ps.add_constant(prefix + ".norm2.offset", 1, C, Real(0));
  ps.add_trunc_normal(prefix + ".mlp.w1", C, C * mlp_ratio);
  ps.add_constant(prefix + ".mlp.b1", 1, C * mlp_ratio, Real(0));
  ps.add_trunc_normal(prefix + ".mlp.w2", C * mlp_ratio, C);
  ps.add_constant(prefix + ".mlp.b2", 1, C, Real(0));
}

template <class Real>
Tensor<Real> rel_pos_tensor(const NeighborTable& table) {
  Tensor<Real> t(table.token_count * table.width, 5);
  for (std::int64_t r = 0; r < t.rows; ++r)
    for (std::int64_t c = 0; c < 5; ++c)
      t(r, c) = static_cast<Real>(table.rel_pos[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  return t;
}

/// Per-head scalar bias for each token/neighbor pair: one linear layer on
/// the expanded relative positions. Input (N*M) x 5, output (N*M) x H.
template <class Real>
typename Graph<Real>::Id position_bias(Graph<Real>& g, typename Graph<Real>::Id rel,
                                       typename Graph<Real>::Id pos_w,
                                       typename Graph<Real>::Id pos_b) {
  return g.add_rowvec(g.matmul(rel, pos_w), pos_b);
}

/// Multi-head local attention over neighbor tables. Softmax runs over the
/// M neighbor slots plus one blank slot; the blank slot has no position
/// bias and contributes the blank value vector.
template <class Real>
typename Graph<Real>::Id local_attention(Graph<Real>& g, GraphBinding<Real>& bind,
                                         const std::string& prefix, typename Graph<Real>::Id x,
                                         const NeighborTable& table, std::int64_t heads) {
  using Id = typename Graph<Real>::Id;
  const std::int64_t n = table.token_count;
  const std::int64_t m = table.width;
  const std::int64_t c = g.value(x).cols;
  const std::int64_t dh = c / heads;
  const Real scale = static_cast<Real>(1.0 / std::sqrt(double(dh)));

  const Id q = g.add_rowvec(g.matmul(x, bind.use(prefix + ".attn.wq")), bind.use(prefix + ".attn.bq"));
  const Id k = g.add_rowvec(g.matmul(x, bind.use(prefix + ".attn.wk")), bind.use(prefix + ".attn.bk"));
  const Id v = g.add_rowvec(g.matmul(x, bind.use(prefix + ".attn.wv")), bind.use(prefix + ".attn.bv"));

  const Id rel = g.leaf(rel_pos_tensor<Real>(table));
  const Id bias = position_bias(g, rel, bind.use(prefix + ".attn.pos_w"), bind.use(prefix + ".attn.pos_b"));

  std::vector<std::int64_t> flat(static_cast<std::size_t>(n * m));
  std::vector<std::int64_t> rep(static_cast<std::size_t>(n * m));
  std::vector<std::int64_t> seg(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      flat[static_cast<std::size_t>(i * m + j)] = table.indices[static_cast<std::size_t>(i * m + j)];
      rep[static_cast<std::size_t>(i * m + j)] = i;
      seg[static_cast<std::size_t>(i * m + j)] = i;
    }

  const Id blank_k = bind.use(prefix + ".attn.blank_k");
  const Id blank_v = bind.use(prefix + ".attn.blank_v");

  std::vector<Id> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (std::int64_t h = 0; h < heads; ++h) {
    const Id qh = g.slice_cols(q, h * dh, dh);
    const Id kh = g.slice_cols(k, h * dh, dh);
    const Id vh = g.slice_cols(v, h * dh, dh);

    const Id qg = g.gather_rows(qh, rep);
    const Id kg = g.gather_rows(kh, flat);
    Id logits = g.scalar_scale(g.row_sum(g.mul(qg, kg)), scale);           // (N*M) x 1
    logits = g.add(logits, g.slice_cols(bias, h, 1));
    logits = g.reshape(logits, n, m);

    const Id bk_h = g.transpose(g.slice_cols(blank_k, h * dh, dh));        // dh x 1
    const Id blank_logit = g.scalar_scale(g.matmul(qh, bk_h), scale);      // N x 1

    const Id all_logits = g.concat_cols({logits, blank_logit});            // N x (M+1)
    if (!g.all_finite(all_logits))
      throw std::runtime_error("local_attention: non-finite logits");
    const Id attn = g.softmax_rows(all_logits);

    const Id aw = g.reshape(g.slice_cols(attn, 0, m), n * m, 1);
    const Id weighted = g.scale_rows(g.gather_rows(vh, flat), aw);
    Id out_h = g.segment_sum(weighted, seg, n);                            // N x dh
    const Id ab = g.slice_cols(attn, m, 1);                                // N x 1
    out_h = g.add(out_h, g.matmul(ab, g.slice_cols(blank_v, h * dh, dh)));
    head_outs.push_back(out_h);
  }

  const Id cat = heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
  return g.add_rowvec(g.matmul(cat, bind.use(prefix + ".attn.wo")), bind.use(prefix + ".attn.bo"));
}

/// Pre-norm residual block: x += attn(LN(x)); x += MLP(LN(x)).
template <class Real>
typename Graph<Real>::Id transformer_block(Graph<Real>& g, GraphBinding<Real>& bind,
                                           const std::string& prefix, typename Graph<Real>::Id x,
                                           const NeighborTable& table, std::int64_t heads) {
  using Id = typename Graph<Real>::Id;
  const Id normed1 = g.layer_norm(x, bind.use(prefix + ".norm1.gain"), bind.use(prefix + ".norm1.offset"));
  x = g.add(x, local_attention(g, bind, prefix, normed1, table, heads));
  const Id normed2 = g.layer_norm(x, bind.use(prefix + ".norm2.gain"), bind.use(prefix + ".norm2.offset"));
  Id h = g.add_rowvec(g.matmul(normed2, bind.use(prefix + ".mlp.w1")), bind.use(prefix + ".mlp.b1"));
  h = g.gelu(h);
  h = g.add_rowvec(g.matmul(h, bind.use(prefix + ".mlp.w2")), bind.use(prefix + ".mlp.b2"));
  return g.add(x, h);
}

/// Same block with every token's neighborhood set to the whole token set.
template <class Real>
typename Graph<Real>::Id global_attention_block(Graph<Real>& g, GraphBinding<Real>& bind,
                                                const std::string& prefix,
                                                typename Graph<Real>::Id x,
                                                const std::vector<Vec2>& positions,
                                                std::int64_t heads) {
  const NeighborTable table = full_neighbor_table(positions);
  return transformer_block(g, bind, prefix, x, table, heads);
}

}  // namespace aff
