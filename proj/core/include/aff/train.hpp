#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "aff/model.hpp"
#include "aff/toy_dataset.hpp"

namespace aff {

struct TrainOptions {
  int epochs = 12;
  double lr = 3e-3;
  double weight_decay = 0.01;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  // When > 0, stop once test accuracy and focus ratio both reach their
  // targets at an epoch boundary.
  double stop_accuracy = 0.0;
  double stop_focus = 0.0;
};

struct EpochLog;
using EpochCallback = std::function<void(const EpochLog&)>;

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double focus_ratio = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

inline double patch_fraction(const std::vector<Vec2>& tokens, const ToyImage& img) {
  if (tokens.empty()) return 0.0;
  int inside = 0;
  for (const Vec2& p : tokens) {
    const double px = p.x * 4.0;
    const double py = p.y * 4.0;
    if (px >= img.patch_x && px < img.patch_x + kToyPatchSize && py >= img.patch_y &&
        py < img.patch_y + kToyPatchSize)
      ++inside;
  }
  return double(inside) / double(tokens.size());
}

template <class Real>
Tensor<Real> pixels_tensor(const ToyImage& img) {
  Tensor<Real> t(std::int64_t(img.size) * img.size, 1);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t.data[i] = static_cast<Real>(img.pixels[i]);
  return t;
}

}  // namespace detail

template <class Real>
struct EvalStats {
  double accuracy = 0.0;
  double focus_ratio = 0.0;
};

/// Test-set accuracy plus the focus ratio: the mean fraction of final-stage
/// tokens inside the patch bbox, normalized by the patch area fraction.
template <class Real>
EvalStats<Real> evaluate(const ModelConfig& cfg, ParamStore<Real>& ps,
                         const std::vector<ToyImage>& images, int threads = 0) {
  const int t = detail::resolve_threads(threads);
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  std::vector<int> correct(static_cast<std::size_t>(n), 0);
  std::vector<double> frac(static_cast<std::size_t>(n), 0.0);

  const auto work = [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const ToyImage& img = images[static_cast<std::size_t>(i)];
      Graph<Real> g;
      GraphBinding<Real> bind(g, ps);
      const auto px = g.leaf(detail::pixels_tensor<Real>(img));
      const ForwardResult<Real> fr = classify(g, bind, cfg, img.size, img.size, px);
      const Tensor<Real>& logits = g.value(fr.logits);
      std::int64_t best = 0;
      for (std::int64_t c = 1; c < logits.cols; ++c)
        if (logits(0, c) > logits(0, best)) best = c;
      correct[static_cast<std::size_t>(i)] = best == img.label ? 1 : 0;
      frac[static_cast<std::size_t>(i)] = detail::patch_fraction(fr.final_positions, img);
    }
  };

  if (t <= 1 || n < 2 * t) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (n + t - 1) / t;
    for (int k = 0; k < t; ++k)
      pool.emplace_back(work, std::min<std::int64_t>(k * chunk, n), std::min<std::int64_t>((k + 1) * chunk, n));
    for (auto& th : pool) th.join();
  }

  EvalStats<Real> stats;
  double fsum = 0.0;
  int csum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    csum += correct[static_cast<std::size_t>(i)];
    fsum += frac[static_cast<std::size_t>(i)];
  }
  const int size = images.empty() ? 1 : images.front().size;
  const double area_fraction = double(kToyPatchSize * kToyPatchSize) / double(size * size);
  stats.accuracy = double(csum) / double(n);
  stats.focus_ratio = (fsum / double(n)) / area_fraction;
  return stats;
}

/// AdamW training on the toy dataset with per-epoch accuracy and focus
/// ratio logging. Deterministic for a fixed seed and thread count.
template <class Real>
TrainResult train_toy(const ModelConfig& cfg, ParamStore<Real>& ps,
                      const std::vector<ToyImage>& train, const std::vector<ToyImage>& test,
                      const TrainOptions& opts, const EpochCallback& on_epoch = {}) {
  const int threads = detail::resolve_threads(opts.threads);
  AdamWState<Real> state;
  std::mt19937_64 shuffler(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::int64_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffler);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      const std::int64_t bsz = static_cast<std::int64_t>(end - start);

      std::vector<std::map<std::string, Tensor<Real>>> grads(static_cast<std::size_t>(threads));
      std::vector<double> losses(static_cast<std::size_t>(threads), 0.0);

      const auto work = [&](int slot, std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
          const ToyImage& img = train[static_cast<std::size_t>(order[q])];
          Graph<Real> g;
          GraphBinding<Real> bind(g, ps);
          const auto px = g.leaf(detail::pixels_tensor<Real>(img));
          const ForwardResult<Real> fr = classify(g, bind, cfg, img.size, img.size, px);
          const auto loss = g.cross_entropy(fr.logits, {img.label});
          losses[static_cast<std::size_t>(slot)] += double(g.value(loss)(0, 0));
          g.backward(loss);
          bind.collect_grads(grads[static_cast<std::size_t>(slot)]);
        }
      };

      if (threads <= 1 || bsz < 2 * threads) {
        work(0, start, end);
      } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (static_cast<std::size_t>(bsz) + threads - 1) / static_cast<std::size_t>(threads);
        for (int k = 0; k < threads; ++k)
          pool.emplace_back(work, k, std::min(end, start + static_cast<std::size_t>(k) * chunk),
                            std::min(end, start + static_cast<std::size_t>(k + 1) * chunk));
        for (auto& th : pool) th.join();
      }

      // Merge per-thread gradients in slot order, then average.
      std::map<std::string, Tensor<Real>>& total = grads[0];
      for (int k = 1; k < threads; ++k)
        for (auto& [name, gt] : grads[static_cast<std::size_t>(k)]) {
          auto it = total.find(name);
          if (it == total.end()) {
            total.emplace(name, std::move(gt));
          } else {
            for (std::int64_t i = 0; i < gt.size(); ++i) it->second.data[static_cast<std::size_t>(i)] += gt.data[static_cast<std::size_t>(i)];
          }
        }
      const Real inv = Real(1) / Real(bsz);
      for (auto& [name, gt] : total)
        for (auto& v : gt.data) v *= inv;

      double batch_loss = 0.0;
      for (const double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_toy: loss diverged (NaN) at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;

      adamw_step(ps, total, state, opts.lr, opts.weight_decay);
    }

    const EvalStats<Real> stats = evaluate(cfg, ps, test, opts.threads);
    result.log.push_back({epoch, epoch_loss / double(train.size()), stats.accuracy, stats.focus_ratio});
    if (on_epoch) on_epoch(result.log.back());
    if (opts.stop_accuracy > 0.0 && stats.accuracy >= opts.stop_accuracy &&
        stats.focus_ratio >= opts.stop_focus)
      break;
  }
  return result;
}

}  // namespace aff
