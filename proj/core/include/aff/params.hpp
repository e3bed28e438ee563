#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include "aff/autodiff.hpp"
#include "aff/tensor.hpp"

namespace aff {

/// Named parameter tensors with deterministic seeded initialization.
///
/// Binary checkpoint layout (little endian):
///   magic "AFFPARAM", u32 version (1), u64 tensor count, then per tensor:
///   u32 name length, name bytes, u8 dtype (4 = f32, 8 = f64),
///   u64 rows, u64 cols, rows*cols scalars.
template <class Real>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  Tensor<Real>& add(const std::string& name, std::int64_t rows, std::int64_t cols) {
    check(!tensors_.count(name), "ParamStore: duplicate name " + name);
    return tensors_[name] = Tensor<Real>(rows, cols);
  }

  /// Truncated normal clipped at 2 sigma. The default sigma is 1/sqrt(rows)
  /// (fan-in scaling), which keeps activations near unit scale through the
  /// non-residual paths; a fixed small sigma starves them at these widths.
  Tensor<Real>& add_trunc_normal(const std::string& name, std::int64_t rows, std::int64_t cols,
                                 double sigma = 0.0) {
    Tensor<Real>& t = add(name, rows, cols);
    if (sigma <= 0.0) sigma = 1.0 / std::sqrt(double(rows));
    std::normal_distribution<double> dist(0.0, sigma);
    for (auto& v : t.data) {
      double z;
      do {
        z = dist(rng_);
      } while (std::abs(z) > 2.0 * sigma);
      v = static_cast<Real>(z);
    }
    return t;
  }

  Tensor<Real>& add_constant(const std::string& name, std::int64_t rows, std::int64_t cols,
                             Real fill) {
    Tensor<Real>& t = add(name, rows, cols);
    for (auto& v : t.data) v = fill;
    return t;
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  Tensor<Real>& get(const std::string& name) {
    auto it = tensors_.find(name);
    check(it != tensors_.end(), "ParamStore: unknown name " + name);
    return it->second;
  }
  const Tensor<Real>& get(const std::string& name) const {
    auto it = tensors_.find(name);
    check(it != tensors_.end(), "ParamStore: unknown name " + name);
    return it->second;
  }

  const std::map<std::string, Tensor<Real>>& tensors() const { return tensors_; }
  std::map<std::string, Tensor<Real>>& tensors() { return tensors_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "ParamStore::save: cannot open " + path);
    f.write("AFFPARAM", 8);
    write_u32(f, 1);
    write_u64(f, tensors_.size());
    for (const auto& [name, t] : tensors_) {
      write_u32(f, static_cast<std::uint32_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      const std::uint8_t dtype = sizeof(Real);
      f.write(reinterpret_cast<const char*>(&dtype), 1);
      write_u64(f, static_cast<std::uint64_t>(t.rows));
      write_u64(f, static_cast<std::uint64_t>(t.cols));
      f.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(Real)));
    }
    check(f.good(), "ParamStore::save: write failed for " + path);
  }

  void load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "ParamStore::load: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    check(f.good() && std::memcmp(magic, "AFFPARAM", 8) == 0, "ParamStore::load: bad magic");
    check(read_u32(f) == 1, "ParamStore::load: unsupported version");
    const std::uint64_t count = read_u64(f);
    tensors_.clear();
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint32_t len = read_u32(f);
      std::string name(len, '\0');
      f.read(name.data(), len);
      std::uint8_t dtype;
      f.read(reinterpret_cast<char*>(&dtype), 1);
      check(dtype == sizeof(Real), "ParamStore::load: dtype mismatch for " + name);
      const std::int64_t rows = static_cast<std::int64_t>(read_u64(f));
      const std::int64_t cols = static_cast<std::int64_t>(read_u64(f));
      Tensor<Real> t(rows, cols);
      f.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(Real)));
      check(f.good(), "ParamStore::load: truncated payload for " + name);
      tensors_.emplace(std::move(name), std::move(t));
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  static void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  static void write_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  static std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  static std::uint64_t read_u64(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  }

  std::map<std::string, Tensor<Real>> tensors_;
  std::mt19937_64 rng_;
};

/// Per-graph view of a ParamStore: parameters enter the graph as leaves on
/// first use; after backward, adjoints are read back per name.
template <class Real>
class GraphBinding {
 public:
  GraphBinding(Graph<Real>& g, ParamStore<Real>& store) : g_(g), store_(store) {}

  typename Graph<Real>::Id use(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const auto id = g_.leaf(store_.get(name), /*requires_grad=*/true);
    ids_.emplace(name, id);
    return id;
  }

  /// Accumulate parameter adjoints into `grads` (created if absent).
  void collect_grads(std::map<std::string, Tensor<Real>>& grads) {
    for (const auto& [name, id] : ids_) {
      const Tensor<Real>& a = g_.adjoint(id);
      auto it = grads.find(name);
      if (it == grads.end()) {
        grads.emplace(name, a);
      } else {
        for (std::int64_t i = 0; i < a.size(); ++i) it->second.data[static_cast<std::size_t>(i)] += a.data[static_cast<std::size_t>(i)];
      }
    }
  }

  Graph<Real>& graph() { return g_; }
  ParamStore<Real>& store() { return store_; }

 private:
  Graph<Real>& g_;
  ParamStore<Real>& store_;
  std::map<std::string, typename Graph<Real>::Id> ids_;
};

template <class Real>
void sgd_step(ParamStore<Real>& params, const std::map<std::string, Tensor<Real>>& grads,
              double lr) {
  for (auto& [name, t] : params.tensors()) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    for (std::int64_t i = 0; i < t.size(); ++i)
      t.data[static_cast<std::size_t>(i)] -= static_cast<Real>(lr) * it->second.data[static_cast<std::size_t>(i)];
  }
}

template <class Real>
struct AdamWState {
  std::map<std::string, Tensor<Real>> m;
  std::map<std::string, Tensor<Real>> v;
  std::int64_t t = 0;
};

/// Decoupled weight decay: p -= lr * (mhat / (sqrt(vhat) + eps) + wd * p).
template <class Real>
void adamw_step(ParamStore<Real>& params, const std::map<std::string, Tensor<Real>>& grads,
                AdamWState<Real>& state, double lr, double weight_decay, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (auto& [name, p] : params.tensors()) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor<Real>& g = it->second;
    auto& m = state.m.try_emplace(name, Tensor<Real>(p.rows, p.cols)).first->second;
    auto& v = state.v.try_emplace(name, Tensor<Real>(p.rows, p.cols)).first->second;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      m.data[s] = static_cast<Real>(beta1 * m.data[s] + (1.0 - beta1) * g.data[s]);
      v.data[s] = static_cast<Real>(beta2 * v.data[s] + (1.0 - beta2) * g.data[s] * g.data[s]);
      const double mhat = m.data[s] / bc1;
      const double vhat = v.data[s] / bc2;
      p.data[s] -= static_cast<Real>(lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.data[s]));
    }
  }
}

}  // namespace aff
