#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aff/downsample.hpp"
#include "aff/gradcheck.hpp"
#include "aff/model.hpp"

using namespace aff;

namespace {

void randomize(ParamStore<double>& ps, std::uint64_t seed, double sigma = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  for (auto& [name, t] : ps.tensors())
    for (auto& v : t.data) v = d(rng);
}

Tensor<double> random_tensor(std::int64_t r, std::int64_t c, std::uint64_t seed) {
  Tensor<double> t(r, c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& v : t.data) v = d(rng);
  return t;
}

double gelu_exact(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Plain-loop weighted neighborhood merge:
//   f_merged(c) = vec( sum_j s_j * W(p_j - p_c) f_j^T ) U
// with W = gelu(layer_norm(rel * w + b)).
Tensor<double> reference_merge(ParamStore<double>& ps, const std::string& p,
                               const std::vector<std::int64_t>& centers,
                               const std::vector<Vec2>& pos, const NeighborTable& tb,
                               const Tensor<double>& scores, const Tensor<double>& f) {
  const Tensor<double>& w = ps.get(p + ".wnet.w");
  const Tensor<double>& b = ps.get(p + ".wnet.b");
  const Tensor<double>& gain = ps.get(p + ".wnet.norm.gain");
  const Tensor<double>& off = ps.get(p + ".wnet.norm.offset");
  const Tensor<double>& u = ps.get(p + ".u");
  const std::int64_t cmid = w.cols, C = f.cols, m = static_cast<std::int64_t>(centers.size());

  Tensor<double> out(m, u.cols);
  for (std::int64_t ci = 0; ci < m; ++ci) {
    const std::int64_t c = centers[std::size_t(ci)];
    std::vector<double> acc(std::size_t(cmid * C), 0.0);  // row-major (a, channel)
    for (std::int64_t j = 0; j < tb.width; ++j) {
      const std::int64_t nb = tb.neighbor(c, j);
      const auto rel = expand_rel(pos[std::size_t(nb)] - pos[std::size_t(c)]);
      std::vector<double> z(std::size_t(cmid), 0.0);
      for (std::int64_t a = 0; a < cmid; ++a) {
        z[std::size_t(a)] = b(0, a);
        for (int e = 0; e < 5; ++e) z[std::size_t(a)] += rel[std::size_t(e)] * w(e, a);
      }
      double mean = 0.0;
      for (const double v : z) mean += v;
      mean /= double(cmid);
      double var = 0.0;
      for (const double v : z) var += (v - mean) * (v - mean);
      var /= double(cmid);
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      for (std::int64_t a = 0; a < cmid; ++a) {
        const double wa = gelu_exact((z[std::size_t(a)] - mean) * inv * gain(0, a) + off(0, a));
        for (std::int64_t ch = 0; ch < C; ++ch)
          acc[std::size_t(a * C + ch)] += scores(nb, 0) * wa * f(nb, ch);
      }
    }
    for (std::int64_t o = 0; o < u.cols; ++o) {
      double s = 0.0;
      for (std::int64_t k = 0; k < cmid * C; ++k) s += acc[std::size_t(k)] * u(k, o);
      out(ci, o) = s;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("downsample") {

TEST_CASE("zero-initialized score layer scores everything 0.5") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 6, 4);
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto s = importance_scores(g, bind, "d", g.leaf(random_tensor(5, 6, 1)));
  for (const double v : g.value(s).data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("importance scores match the closed form") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 4, 3);
  randomize(ps, 2);
  const Tensor<double> f = random_tensor(6, 4, 3);
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto s = importance_scores(g, bind, "d", g.leaf(f));
  const Tensor<double>& w = ps.get("d.score.w");
  const Tensor<double>& b = ps.get("d.score.b");
  const Tensor<double>& gain = ps.get("d.score.norm.gain");
  const Tensor<double>& off = ps.get("d.score.norm.offset");
  for (std::int64_t r = 0; r < 6; ++r) {
    double mean = 0.0;
    for (std::int64_t c = 0; c < 4; ++c) mean += f(r, c);
    mean /= 4.0;
    double var = 0.0;
    for (std::int64_t c = 0; c < 4; ++c) var += (f(r, c) - mean) * (f(r, c) - mean);
    var /= 4.0;
    double z = b(0, 0);
    for (std::int64_t c = 0; c < 4; ++c)
      z += ((f(r, c) - mean) / std::sqrt(var + 1e-5) * gain(0, c) + off(0, c)) * w(c, 0);
    CHECK(g.value(s)(r, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
  }
}

TEST_CASE("local stride rounds the nearest L1 distance up to a power of two") {
  // Nearest neighbor at L1 distance 3 -> stride 4; exact powers map to themselves.
  const auto t = local_stride({{0, 0}, {3, 0}, {100, 100}, {104, 100}});
  CHECK(t[0] == 4);
  CHECK(t[1] == 4);
  CHECK(t[2] == 4);
  CHECK(t[3] == 4);
  const auto unit = local_stride(lattice_positions(3, 3));
  for (const auto v : unit) CHECK(v == 1);
}

TEST_CASE("local stride rejects degenerate inputs") {
  CHECK_THROWS(local_stride({{0, 0}}));
  CHECK_THROWS(local_stride({{1, 1}, {1, 1}}));
}

TEST_CASE("grid prior flags alternating-lattice and reserved tokens") {
  // Unit lattice: stride 1, so g = 1 on even coordinates; stage 1 reserves
  // multiples of 4.
  const std::vector<Vec2> pos = lattice_positions(8, 8);
  const GridPrior p = grid_prior(pos, 1);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const std::int64_t x = std::llround(pos[i].x), y = std::llround(pos[i].y);
    CHECK(p.g[i] == ((x % 2 == 0 && y % 2 == 0) ? 1 : 0));
    CHECK(int(p.reserved[i]) == ((x % 4 == 0 && y % 4 == 0) ? 1 : 0));
  }
}

TEST_CASE("grid prior on a stride-2 lattice flags multiples of 4") {
  std::vector<Vec2> pos;
  for (int y = 0; y < 8; y += 2)
    for (int x = 0; x < 8; x += 2) pos.push_back({double(x), double(y)});
  const GridPrior p = grid_prior(pos, 2);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const std::int64_t x = std::llround(pos[i].x), y = std::llround(pos[i].y);
    CHECK(p.g[i] == ((x % 4 == 0 && y % 4 == 0) ? 1 : 0));
    CHECK(int(p.reserved[i]) == ((x % 8 == 0 && y % 8 == 0) ? 1 : 0));
  }
}

TEST_CASE("grid prior rejects off-lattice positions") {
  CHECK_THROWS(grid_prior({{0.5, 0.0}, {1.0, 0.0}}, 1));
}

TEST_CASE("selection keeps round(fraction * N) tokens") {
  GridPrior p;
  p.g.assign(8, 0);
  p.reserved.assign(8, 0);
  p.stride.assign(8, 1);
  const std::vector<double> s(8, 0.5);
  CHECK(select_centers(p, s, 4.0, 0.25).size() == 2);
  CHECK(select_centers(p, s, 4.0, 0.2).size() == 2);  // round(1.6)
  CHECK(select_centers(p, s, 4.0, 1.0).size() == 8);
}

TEST_CASE("a reserved token beats a perfect score") {
  GridPrior p;
  p.g = {0, 1};
  p.reserved = {1, 0};
  p.stride = {1, 1};
  const std::vector<double> s = {0.0, 1.0};
  const auto kept = select_centers(p, s, 4.0, 0.5);
  CHECK(kept == std::vector<std::int64_t>{0});
}

TEST_CASE("six-token selection follows g plus alpha times s") {
  GridPrior p;
  p.g = {1, 0, 0, 1, 0, 0};
  p.reserved = {0, 0, 0, 0, 0, 0};
  p.stride.assign(6, 1);
  const std::vector<double> s = {0.1, 0.9, 0.3, 0.2, 0.6, 0.05};
  // keys with alpha=2: 1.2, 1.8, 0.6, 1.4, 1.2, 0.1; keep 3 -> tokens 1, 3,
  // then the 1.2 tie between 0 and 4 goes to the lower index.
  CHECK(select_centers(p, s, 2.0, 0.5) == std::vector<std::int64_t>{0, 1, 3});
}

TEST_CASE("raising a kept token's score never evicts it") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> sd(0.0, 1.0);
  GridPrior p;
  p.g = {1, 0, 1, 0, 1, 0, 1, 0};
  p.reserved.assign(8, 0);
  p.stride.assign(8, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(8);
    for (auto& v : s) v = sd(rng);
    const auto kept = select_centers(p, s, 4.0, 0.5);
    for (const std::int64_t i : kept) {
      std::vector<double> s2 = s;
      s2[std::size_t(i)] = std::min(1.0, s2[std::size_t(i)] + 0.3);
      const auto kept2 = select_centers(p, s2, 4.0, 0.5);
      CHECK(std::find(kept2.begin(), kept2.end(), i) != kept2.end());
    }
  }
}

TEST_CASE("reserved overflow grows the kept set") {
  GridPrior p;
  p.g.assign(8, 0);
  p.reserved = {1, 1, 1, 1, 1, 0, 0, 0};
  p.stride.assign(8, 1);
  const std::vector<double> s(8, 0.5);
  const auto kept = select_centers(p, s, 4.0, 0.25);  // quota 2, 5 reserved
  CHECK(kept == std::vector<std::int64_t>{0, 1, 2, 3, 4});
}

TEST_CASE("zero scores zero out the merged features") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 5, 4);
  randomize(ps, 7);
  const std::vector<Vec2> pos = lattice_positions(3, 3);
  const NeighborTable tb = full_neighbor_table(pos);
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto out = merge_neighborhoods(g, bind, "d", {0, 4}, pos, tb,
                                       g.leaf(Tensor<double>(9, 1)), g.leaf(random_tensor(9, 5, 8)));
  for (const double v : g.value(out).data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("merge is linear in the scores") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 4, 3);
  randomize(ps, 9);
  const std::vector<Vec2> pos = lattice_positions(2, 3);
  const NeighborTable tb = full_neighbor_table(pos);
  const Tensor<double> f = random_tensor(6, 4, 10);
  Tensor<double> s(6, 1);
  for (std::int64_t i = 0; i < 6; ++i) s(i, 0) = 0.1 + 0.1 * double(i);
  Tensor<double> s2 = s;
  for (auto& v : s2.data) v *= 2.0;

  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto a = merge_neighborhoods(g, bind, "d", {1, 4}, pos, tb, g.leaf(s), g.leaf(f));
  const auto b = merge_neighborhoods(g, bind, "d", {1, 4}, pos, tb, g.leaf(s2), g.leaf(f));
  for (std::int64_t i = 0; i < g.value(a).size(); ++i)
    CHECK(g.value(b).data[std::size_t(i)] ==
          doctest::Approx(2.0 * g.value(a).data[std::size_t(i)]).epsilon(1e-12));
}

TEST_CASE("merge matches the dense reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::int64_t C = 2 + trial, Cout = 3 + trial % 2;
    ParamStore<double> ps(0);
    register_downsample(ps, "d", C, Cout);
    randomize(ps, 100 + std::uint64_t(trial));
    std::uniform_int_distribution<int> nd(4, 12);
    const int n = nd(rng);
    std::vector<Vec2> pos;
    std::set<std::pair<int, int>> used;
    std::uniform_int_distribution<int> cd(0, 9);
    while (static_cast<int>(pos.size()) < n) {
      const int x = cd(rng), y = cd(rng);
      if (used.insert({x, y}).second) pos.push_back({double(x), double(y)});
    }
    const ClusterAssignment a = balanced_cluster(pos, 4, CurveKind::Scanline);
    const NeighborTable tb = build_neighbor_table(pos, a, a.cluster_count);
    const Tensor<double> f = random_tensor(n, C, 200 + std::uint64_t(trial));
    Tensor<double> s(n, 1);
    std::uniform_real_distribution<double> sd(0.0, 1.0);
    for (auto& v : s.data) v = sd(rng);
    const std::vector<std::int64_t> centers = {0, std::int64_t(n / 2), std::int64_t(n - 1)};

    Graph<double> g;
    GraphBinding<double> bind(g, ps);
    const auto out = merge_neighborhoods(g, bind, "d", centers, pos, tb, g.leaf(s), g.leaf(f));
    const Tensor<double> want = reference_merge(ps, "d", centers, pos, tb, s, f);
    for (std::int64_t i = 0; i < want.size(); ++i)
      CHECK(g.value(out).data[std::size_t(i)] ==
            doctest::Approx(want.data[std::size_t(i)]).epsilon(1e-12));
  }
}

TEST_CASE("keep fraction one keeps every token") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 4, 4);
  const std::vector<Vec2> pos = lattice_positions(3, 3);
  const NeighborTable tb = full_neighbor_table(pos);
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto r = downsample(g, bind, "d", pos, tb, g.leaf(random_tensor(9, 4, 12)), 1, 4.0, 1.0);
  CHECK(r.centers.size() == 9);
  CHECK(r.positions.size() == 9);
}

TEST_CASE("alpha zero on a 16x16 lattice keeps the even sub-lattice") {
  const std::vector<Vec2> pos = lattice_positions(16, 16);
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 4, 4);
  randomize(ps, 13);
  for (auto& v : ps.get("d.score.w").data) v = 0.3;  // non-uniform scores
  const ClusterAssignment a = balanced_cluster(pos, 8, CurveKind::Scanline);
  const NeighborTable tb = build_neighbor_table(pos, a, 3);
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto r = downsample(g, bind, "d", pos, tb, g.leaf(random_tensor(256, 4, 14)), 1, 0.0, 0.25);
  REQUIRE(r.centers.size() == 64);
  for (const std::int64_t c : r.centers) {
    const std::int64_t x = std::llround(pos[std::size_t(c)].x);
    const std::int64_t y = std::llround(pos[std::size_t(c)].y);
    CHECK(x % 2 == 0);
    CHECK(y % 2 == 0);
  }
}

TEST_CASE("reserved tokens survive random scorings") {
  const std::vector<Vec2> pos = lattice_positions(12, 12);
  const GridPrior prior = grid_prior(pos, 1);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> sd(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(pos.size());
    for (auto& v : s) v = sd(rng);
    const auto kept = select_centers(prior, s, 4.0, 0.25);
    const std::set<std::int64_t> kept_set(kept.begin(), kept.end());
    for (std::size_t i = 0; i < pos.size(); ++i)
      if (prior.reserved[i]) CHECK(kept_set.count(std::int64_t(i)) == 1);
  }
}

TEST_CASE("a lone token survives as its own center") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 4, 4);
  randomize(ps, 17);
  const std::vector<Vec2> pos = {{3, 5}};
  Graph<double> g;
  GraphBinding<double> bind(g, ps);
  const auto r = downsample(g, bind, "d", pos, full_neighbor_table(pos),
                            g.leaf(random_tensor(1, 4, 18)), 2, 4.0, 0.25);
  CHECK(r.centers == std::vector<std::int64_t>{0});
  CHECK(r.positions.size() == 1);
}

TEST_CASE("merge gradients reach the score weights") {
  ParamStore<double> ps(0);
  register_downsample(ps, "d", 5, 4);
  randomize(ps, 19, 0.2);
  const std::vector<Vec2> pos = lattice_positions(3, 3);
  const NeighborTable tb = full_neighbor_table(pos);
  const Tensor<double> f = random_tensor(9, 5, 20);
  const auto rep = grad_check(ps, [&](Graph<double>& g, GraphBinding<double>& bind) {
    const auto s = importance_scores(g, bind, "d", g.leaf(f));
    return g.mean_all(merge_neighborhoods(g, bind, "d", {0, 4, 8}, pos, tb, s, g.leaf(f)));
  }, 16);
  CHECK(rep.max_rel_err < 1e-4);
  for (const auto& e : rep.entries)
    if (e.name == "d.score.w") CHECK(e.grad_norm > 0.0);
}

}  // TEST_SUITE
