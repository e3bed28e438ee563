#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "aff/params.hpp"

namespace aff {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double grad_norm = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool passes(double tol) const { return max_rel_err < tol; }
};

/// Compares analytic gradients of a scalar-valued builder against central
/// finite differences on randomly sampled coordinates (all coordinates for
/// small tensors). Run at 64-bit only.
///
/// The builder is called as f(graph, binding) and must return the scalar id.
template <class F>
GradCheckReport grad_check(ParamStore<double>& params, F&& f, int samples_per_tensor = 32,
                           double h = 1e-5, std::uint64_t seed = 0) {
  GradCheckReport report;

  std::map<std::string, Tensor<double>> grads;
  double base;
  {
    Graph<double> g;
    GraphBinding<double> bind(g, params);
    const auto loss = f(g, bind);
    check(g.value(loss).size() == 1, "grad_check: builder must return a scalar");
    base = g.value(loss)(0, 0);
    check(std::isfinite(base), "grad_check: non-finite forward value");
    g.backward(loss);
    bind.collect_grads(grads);
  }

  const auto eval = [&]() {
    Graph<double> g;
    GraphBinding<double> bind(g, params);
    const auto loss = f(g, bind);
    const double v = g.value(loss)(0, 0);
    check(std::isfinite(v), "grad_check: non-finite forward value");
    return v;
  };

  std::mt19937_64 rng(seed);
  for (auto& [name, grad] : grads) {
    Tensor<double>& p = params.get(name);
    GradCheckEntry entry;
    entry.name = name;
    for (const double gv : grad.data) entry.grad_norm += gv * gv;
    entry.grad_norm = std::sqrt(entry.grad_norm);

    std::vector<std::int64_t> coords(static_cast<std::size_t>(p.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (static_cast<int>(coords.size()) > samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(samples_per_tensor));
    }

    for (const std::int64_t ci : coords) {
      const std::size_t c = static_cast<std::size_t>(ci);
      const double orig = p.data[c];
      p.data[c] = orig + h;
      const double fp = eval();
      p.data[c] = orig - h;
      const double fm = eval();
      p.data[c] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = grad.data[c];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace aff
