#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "aff/tensor.hpp"

namespace aff {

/// Reverse-mode tape over dense matrices. Forward values are computed
/// eagerly at op insertion; backward() replays the tape once in reverse
/// creation order (which is a reverse topological order).
template <class Real>
class Graph {
 public:
  using Id = std::int32_t;

  Id leaf(Tensor<Real> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad});
    return static_cast<Id>(nodes_.size() - 1);
  }

  const Tensor<Real>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor<Real>& adjoint(Id id) { return grad_of(id); }
  bool requires_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // ---- ops ----

  Id matmul(Id a, Id b) {
    const Tensor<Real>& A = value(a);
    const Tensor<Real>& B = value(b);
    check(A.cols == B.rows, "matmul: shape mismatch " + A.shape_str() + " x " + B.shape_str());
    Tensor<Real> out(A.rows, B.cols);
    mm_acc(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.cols, false, false);
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      const Tensor<Real>& A = value_of(a);
      const Tensor<Real>& B = value_of(b);
      if (needs(a))  // dA += dC * B^T
        mm_acc(n.grad.data.data(), B.data.data(), grad_of(a).data.data(), n.grad.rows, n.grad.cols,
               B.rows, false, true);
      if (needs(b))  // dB += A^T * dC
        mm_acc(A.data.data(), n.grad.data.data(), grad_of(b).data.data(), A.cols, A.rows,
               n.grad.cols, true, false);
    });
  }

  Id transpose(Id a) {
    const Tensor<Real>& A = value(a);
    Tensor<Real> out(A.cols, A.rows);
    for (std::int64_t r = 0; r < A.rows; ++r)
      for (std::int64_t c = 0; c < A.cols; ++c) out(c, r) = A(r, c);
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t r = 0; r < n.grad.rows; ++r)
        for (std::int64_t c = 0; c < n.grad.cols; ++c) da(c, r) += n.grad(r, c);
    });
  }

  Id add(Id a, Id b) {
    const Tensor<Real>& A = value(a);
    const Tensor<Real>& B = value(b);
    check(A.same_shape(B), "add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] += B.data[static_cast<std::size_t>(i)];
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      if (needs(a)) axpy(grad_of(a), n.grad);
      if (needs(b)) axpy(grad_of(b), n.grad);
    });
  }

  /// x (N x C) + bias (1 x C) broadcast over rows.
  Id add_rowvec(Id a, Id bias) {
    const Tensor<Real>& A = value(a);
    const Tensor<Real>& B = value(bias);
    check(B.rows == 1 && B.cols == A.cols,
          "add_rowvec: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out = A;
    for (std::int64_t r = 0; r < A.rows; ++r)
      for (std::int64_t c = 0; c < A.cols; ++c) out(r, c) += B(0, c);
    return make(std::move(out), {a, bias}, [this, a, bias](Node& n) {
      if (needs(a)) axpy(grad_of(a), n.grad);
      if (needs(bias)) {
        Tensor<Real>& db = grad_of(bias);
        for (std::int64_t r = 0; r < n.grad.rows; ++r)
          for (std::int64_t c = 0; c < n.grad.cols; ++c) db(0, c) += n.grad(r, c);
      }
    });
  }

  Id mul(Id a, Id b) {
    const Tensor<Real>& A = value(a);
    const Tensor<Real>& B = value(b);
    check(A.same_shape(B), "mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[static_cast<std::size_t>(i)] *= B.data[static_cast<std::size_t>(i)];
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      const Tensor<Real>& A = value_of(a);
      const Tensor<Real>& B = value_of(b);
      if (needs(a)) {
        Tensor<Real>& da = grad_of(a);
        for (std::int64_t i = 0; i < n.grad.size(); ++i) da.data[static_cast<std::size_t>(i)] += n.grad.data[static_cast<std::size_t>(i)] * B.data[static_cast<std::size_t>(i)];
      }
      if (needs(b)) {
        Tensor<Real>& db = grad_of(b);
        for (std::int64_t i = 0; i < n.grad.size(); ++i) db.data[static_cast<std::size_t>(i)] += n.grad.data[static_cast<std::size_t>(i)] * A.data[static_cast<std::size_t>(i)];
      }
    });
  }

  /// Row-wise scaling: x (N x C) scaled by w (N x 1).
  Id scale_rows(Id x, Id w) {
    const Tensor<Real>& X = value(x);
    const Tensor<Real>& W = value(w);
    check(W.rows == X.rows && W.cols == 1,
          "scale_rows: shape mismatch " + X.shape_str() + " vs " + W.shape_str());
    Tensor<Real> out = X;
    for (std::int64_t r = 0; r < X.rows; ++r)
      for (std::int64_t c = 0; c < X.cols; ++c) out(r, c) *= W(r, 0);
    return make(std::move(out), {x, w}, [this, x, w](Node& n) {
      const Tensor<Real>& X = value_of(x);
      const Tensor<Real>& W = value_of(w);
      if (needs(x)) {
        Tensor<Real>& dx = grad_of(x);
        for (std::int64_t r = 0; r < X.rows; ++r)
          for (std::int64_t c = 0; c < X.cols; ++c) dx(r, c) += n.grad(r, c) * W(r, 0);
      }
      if (needs(w)) {
        Tensor<Real>& dw = grad_of(w);
        for (std::int64_t r = 0; r < X.rows; ++r) {
          Real s = 0;
          for (std::int64_t c = 0; c < X.cols; ++c) s += n.grad(r, c) * X(r, c);
          dw(r, 0) += s;
        }
      }
    });
  }

  Id scalar_scale(Id a, Real s) {
    Tensor<Real> out = value(a);
    for (auto& v : out.data) v *= s;
    return make(std::move(out), {a}, [this, a, s](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) da.data[static_cast<std::size_t>(i)] += s * n.grad.data[static_cast<std::size_t>(i)];
    });
  }

  Id sigmoid(Id a) {
    Tensor<Real> out = value(a);
    for (auto& v : out.data) v = Real(1) / (Real(1) + std::exp(-v));
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        const Real y = n.value.data[static_cast<std::size_t>(i)];
        da.data[static_cast<std::size_t>(i)] += n.grad.data[static_cast<std::size_t>(i)] * y * (Real(1) - y);
      }
    });
  }

  Id gelu(Id a) {
    Tensor<Real> out = value(a);
    for (auto& v : out.data) v = v * phi(v);
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      const Tensor<Real>& X = value_of(a);
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        const Real x = X.data[static_cast<std::size_t>(i)];
        const Real d = phi(x) + x * pdf(x);
        da.data[static_cast<std::size_t>(i)] += n.grad.data[static_cast<std::size_t>(i)] * d;
      }
    });
  }

  Id softmax_rows(Id a) {
    const Tensor<Real>& A = value(a);
    Tensor<Real> out(A.rows, A.cols);
    for (std::int64_t r = 0; r < A.rows; ++r) {
      Real mx = A(r, 0);
      for (std::int64_t c = 1; c < A.cols; ++c) mx = std::max(mx, A(r, c));
      Real sum = 0;
      for (std::int64_t c = 0; c < A.cols; ++c) {
        out(r, c) = std::exp(A(r, c) - mx);
        sum += out(r, c);
      }
      for (std::int64_t c = 0; c < A.cols; ++c) out(r, c) /= sum;
    }
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t r = 0; r < n.value.rows; ++r) {
        Real dot = 0;
        for (std::int64_t c = 0; c < n.value.cols; ++c) dot += n.grad(r, c) * n.value(r, c);
        for (std::int64_t c = 0; c < n.value.cols; ++c)
          da(r, c) += n.value(r, c) * (n.grad(r, c) - dot);
      }
    });
  }

  /// Per-row layer normalization; gain and offset are 1 x C.
  Id layer_norm(Id x, Id gain, Id offset) {
    const Tensor<Real>& X = value(x);
    const Tensor<Real>& G = value(gain);
    const Tensor<Real>& B = value(offset);
    check(G.rows == 1 && G.cols == X.cols && B.rows == 1 && B.cols == X.cols,
          "layer_norm: shape mismatch " + X.shape_str() + " vs " + G.shape_str());
    const Real eps = Real(1e-5);
    Tensor<Real> out(X.rows, X.cols);
    Tensor<Real> xhat(X.rows, X.cols);
    std::vector<Real> inv_std(static_cast<std::size_t>(X.rows));
    for (std::int64_t r = 0; r < X.rows; ++r) {
      Real mean = 0;
      for (std::int64_t c = 0; c < X.cols; ++c) mean += X(r, c);
      mean /= Real(X.cols);
      Real var = 0;
      for (std::int64_t c = 0; c < X.cols; ++c) {
        const Real d = X(r, c) - mean;
        var += d * d;
      }
      var /= Real(X.cols);
      const Real is = Real(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(r)] = is;
      for (std::int64_t c = 0; c < X.cols; ++c) {
        xhat(r, c) = (X(r, c) - mean) * is;
        out(r, c) = xhat(r, c) * G(0, c) + B(0, c);
      }
    }
    return make(std::move(out), {x, gain, offset},
                [this, x, gain, offset, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
      const Tensor<Real>& G = value_of(gain);
      const std::int64_t C = n.value.cols;
      if (needs(gain)) {
        Tensor<Real>& dg = grad_of(gain);
        for (std::int64_t r = 0; r < n.value.rows; ++r)
          for (std::int64_t c = 0; c < C; ++c) dg(0, c) += n.grad(r, c) * xhat(r, c);
      }
      if (needs(offset)) {
        Tensor<Real>& db = grad_of(offset);
        for (std::int64_t r = 0; r < n.value.rows; ++r)
          for (std::int64_t c = 0; c < C; ++c) db(0, c) += n.grad(r, c);
      }
      if (needs(x)) {
        Tensor<Real>& dx = grad_of(x);
        for (std::int64_t r = 0; r < n.value.rows; ++r) {
          Real sum_gy = 0, sum_gyx = 0;
          for (std::int64_t c = 0; c < C; ++c) {
            const Real gy = n.grad(r, c) * G(0, c);
            sum_gy += gy;
            sum_gyx += gy * xhat(r, c);
          }
          const Real is = inv_std[static_cast<std::size_t>(r)];
          for (std::int64_t c = 0; c < C; ++c) {
            const Real gy = n.grad(r, c) * G(0, c);
            dx(r, c) += is * (gy - sum_gy / Real(C) - xhat(r, c) * sum_gyx / Real(C));
          }
        }
      }
    });
  }

  /// Rows of x indexed by idx; idx entry -1 yields a zero row.
  Id gather_rows(Id x, std::vector<std::int64_t> idx) {
    const Tensor<Real>& X = value(x);
    Tensor<Real> out(static_cast<std::int64_t>(idx.size()), X.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::int64_t s = idx[r];
      if (s < 0) continue;
      check(s < X.rows, "gather_rows: index out of range");
      for (std::int64_t c = 0; c < X.cols; ++c) out(static_cast<std::int64_t>(r), c) = X(s, c);
    }
    return make(std::move(out), {x}, [this, x, idx = std::move(idx)](Node& n) {
      if (!needs(x)) return;
      Tensor<Real>& dx = grad_of(x);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::int64_t s = idx[r];
        if (s < 0) continue;
        for (std::int64_t c = 0; c < n.grad.cols; ++c) dx(s, c) += n.grad(static_cast<std::int64_t>(r), c);
      }
    });
  }

  /// Sums rows of x into nseg buckets given per-row segment ids; the
  /// adjoint of gather_rows.
  Id segment_sum(Id x, std::vector<std::int64_t> seg, std::int64_t nseg) {
    const Tensor<Real>& X = value(x);
    check(static_cast<std::int64_t>(seg.size()) == X.rows, "segment_sum: segment list length mismatch");
    Tensor<Real> out(nseg, X.cols);
    for (std::size_t r = 0; r < seg.size(); ++r) {
      const std::int64_t s = seg[r];
      check(s >= 0 && s < nseg, "segment_sum: segment id out of range");
      for (std::int64_t c = 0; c < X.cols; ++c) out(s, c) += X(static_cast<std::int64_t>(r), c);
    }
    return make(std::move(out), {x}, [this, x, seg = std::move(seg)](Node& n) {
      if (!needs(x)) return;
      Tensor<Real>& dx = grad_of(x);
      for (std::size_t r = 0; r < seg.size(); ++r)
        for (std::int64_t c = 0; c < n.grad.cols; ++c) dx(static_cast<std::int64_t>(r), c) += n.grad(seg[r], c);
    });
  }

  Id reshape(Id a, std::int64_t rows, std::int64_t cols) {
    const Tensor<Real>& A = value(a);
    check(rows * cols == A.size(), "reshape: size mismatch " + A.shape_str() + " -> [" +
                                       std::to_string(rows) + "x" + std::to_string(cols) + "]");
    Tensor<Real> out = A;
    out.rows = rows;
    out.cols = cols;
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) da.data[static_cast<std::size_t>(i)] += n.grad.data[static_cast<std::size_t>(i)];
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    check(!parts.empty(), "concat_cols: no inputs");
    const std::int64_t rows = value(parts[0]).rows;
    std::int64_t cols = 0;
    for (Id p : parts) {
      check(value(p).rows == rows, "concat_cols: row count mismatch");
      cols += value(p).cols;
    }
    Tensor<Real> out(rows, cols);
    std::int64_t off = 0;
    for (Id p : parts) {
      const Tensor<Real>& P = value(p);
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < P.cols; ++c) out(r, off + c) = P(r, c);
      off += P.cols;
    }
    return make(std::move(out), parts, [this, parts](Node& n) {
      std::int64_t off = 0;
      for (Id p : parts) {
        const std::int64_t pc = value_of(p).cols;
        if (needs(p)) {
          Tensor<Real>& dp = grad_of(p);
          for (std::int64_t r = 0; r < n.grad.rows; ++r)
            for (std::int64_t c = 0; c < pc; ++c) dp(r, c) += n.grad(r, off + c);
        }
        off += pc;
      }
    });
  }

  Id slice_cols(Id a, std::int64_t start, std::int64_t len) {
    const Tensor<Real>& A = value(a);
    check(start >= 0 && start + len <= A.cols, "slice_cols: range out of bounds");
    Tensor<Real> out(A.rows, len);
    for (std::int64_t r = 0; r < A.rows; ++r)
      for (std::int64_t c = 0; c < len; ++c) out(r, c) = A(r, start + c);
    return make(std::move(out), {a}, [this, a, start, len](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t r = 0; r < n.grad.rows; ++r)
        for (std::int64_t c = 0; c < len; ++c) da(r, start + c) += n.grad(r, c);
    });
  }

  /// N x C -> N x 1 row sums.
  Id row_sum(Id a) {
    const Tensor<Real>& A = value(a);
    Tensor<Real> out(A.rows, 1);
    for (std::int64_t r = 0; r < A.rows; ++r) {
      Real s = 0;
      for (std::int64_t c = 0; c < A.cols; ++c) s += A(r, c);
      out(r, 0) = s;
    }
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      for (std::int64_t r = 0; r < da.rows; ++r)
        for (std::int64_t c = 0; c < da.cols; ++c) da(r, c) += n.grad(r, 0);
    });
  }

  /// Scalar mean over all entries.
  Id mean_all(Id a) {
    const Tensor<Real>& A = value(a);
    Tensor<Real> out(1, 1);
    Real s = 0;
    for (const Real v : A.data) s += v;
    out(0, 0) = s / Real(A.size());
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!needs(a)) return;
      Tensor<Real>& da = grad_of(a);
      const Real g = n.grad(0, 0) / Real(da.size());
      for (auto& v : da.data) v += g;
    });
  }

  /// Mean cross-entropy of row-wise softmax against integer labels.
  Id cross_entropy(Id logits, std::vector<std::int64_t> labels) {
    const Tensor<Real>& L = value(logits);
    check(static_cast<std::int64_t>(labels.size()) == L.rows, "cross_entropy: label count mismatch");
    Tensor<Real> probs(L.rows, L.cols);
    Tensor<Real> out(1, 1);
    Real loss = 0;
    for (std::int64_t r = 0; r < L.rows; ++r) {
      Real mx = L(r, 0);
      for (std::int64_t c = 1; c < L.cols; ++c) mx = std::max(mx, L(r, c));
      Real sum = 0;
      for (std::int64_t c = 0; c < L.cols; ++c) {
        probs(r, c) = std::exp(L(r, c) - mx);
        sum += probs(r, c);
      }
      for (std::int64_t c = 0; c < L.cols; ++c) probs(r, c) /= sum;
      const std::int64_t y = labels[static_cast<std::size_t>(r)];
      check(y >= 0 && y < L.cols, "cross_entropy: label out of range");
      loss -= std::log(std::max(probs(r, y), Real(1e-30)));
    }
    out(0, 0) = loss / Real(L.rows);
    return make(std::move(out), {logits},
                [this, logits, labels = std::move(labels), probs = std::move(probs)](Node& n) {
      if (!needs(logits)) return;
      Tensor<Real>& dl = grad_of(logits);
      const Real g = n.grad(0, 0) / Real(dl.rows);
      for (std::int64_t r = 0; r < dl.rows; ++r) {
        for (std::int64_t c = 0; c < dl.cols; ++c) dl(r, c) += g * probs(r, c);
        dl(r, labels[static_cast<std::size_t>(r)]) -= g;
      }
    });
  }

  // ---- backward ----

  void backward(Id scalar_node) {
    Node& top = nodes_[static_cast<std::size_t>(scalar_node)];
    check(top.value.size() == 1, "backward: seed must be scalar");
    grad_of(scalar_node)(0, 0) = Real(1);
    for (std::int64_t i = scalar_node; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(n);
    }
  }

  bool all_finite(Id id) const {
    for (const Real v : value(id).data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    std::function<void(Node&)> backward;
    bool requires_grad = false;
  };

  static Real phi(Real x) { return Real(0.5) * (Real(1) + std::erf(x * Real(M_SQRT1_2))); }
  static Real pdf(Real x) { return std::exp(Real(-0.5) * x * x) * Real(0.3989422804014327); }

  bool needs(Id id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  const Tensor<Real>& value_of(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  Tensor<Real>& grad_of(Id id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Tensor<Real>(n.value.rows, n.value.cols);
    return n.grad;
  }

  static void axpy(Tensor<Real>& dst, const Tensor<Real>& src) {
    for (std::int64_t i = 0; i < dst.size(); ++i) dst.data[static_cast<std::size_t>(i)] += src.data[static_cast<std::size_t>(i)];
  }

  // C += op(A) * op(B); transposition handled by index swizzling.
  static void mm_acc(const Real* A, const Real* B, Real* C, std::int64_t m, std::int64_t k,
                     std::int64_t n, bool ta, bool tb) {
    // A is m x k after op, B is k x n after op. Stored leading dims follow
    // the untransposed layouts.
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t p = 0; p < k; ++p) {
        const Real a = ta ? A[p * m + i] : A[i * k + p];
        if (a == Real(0)) continue;
        const Real* brow = tb ? nullptr : B + p * n;
        Real* crow = C + i * n;
        if (!tb) {
          for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        } else {
          for (std::int64_t j = 0; j < n; ++j) crow[j] += a * B[j * k + p];
        }
      }
    }
  }

  template <class F>
  Id make(Tensor<Real> out, const std::vector<Id>& parents, F&& bw) {
    bool rg = false;
    for (Id p : parents) rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
    Node n;
    n.value = std::move(out);
    n.requires_grad = rg;
    if (rg) n.backward = std::forward<F>(bw);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace aff
