#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "isingmarket/network_analysis.hpp"
#include "isingmarket/synthetic.hpp"
#include "oracle.hpp"

using namespace im;

namespace {

Matrix random_symmetric(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) w(i, j) = w(j, i) = u(rng);
  return w;
}

std::vector<Edge> chain(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.push_back(Edge{i, i + 1, 1.0});
  return e;
}

bool connected(const std::vector<Edge>& edges, std::size_t n) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (const auto& e : edges) parent[find(e.i)] = find(e.j);
  for (std::size_t v = 1; v < n; ++v)
    if (find(v) != find(0)) return false;
  return true;
}

}  // namespace

TEST_CASE("three-node maximum tree") {
  Matrix w(3, 3);
  w << 0, 0.9, 0.5, 0.9, 0, 0.1, 0.5, 0.1, 0;
  const auto f = build_mst(w);
  REQUIRE(f.edges.size() == 2);
  CHECK(f.edges[0].i == 0);
  CHECK(f.edges[0].j == 1);
  CHECK(f.edges[1].i == 0);
  CHECK(f.edges[1].j == 2);
  CHECK_FALSE(f.disconnected());
}

TEST_CASE("ties give the lexicographically smallest edge sequence") {
  const auto f = build_mst(Matrix::Constant(5, 5, 0.3));
  REQUIRE(f.edges.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(f.edges[k].i == 0);
    CHECK(f.edges[k].j == k + 1);
  }
}

TEST_CASE("maximum tree matches exhaustive enumeration") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    const Matrix w = random_symmetric(rng, n);
    const auto f = build_mst(w);
    CHECK(f.edges.size() == static_cast<std::size_t>(n - 1));
    CHECK(connected(f.edges, static_cast<std::size_t>(n)));
    CHECK(total_weight(f.edges) == doctest::Approx(oracle::max_spanning_tree_weight(w)).epsilon(1e-14));
  }
}

TEST_CASE("absent weights give a forest") {
  const double x = -INFINITY;
  Matrix w(4, 4);
  w << 0, 1, x, x, 1, 0, x, x, x, x, 0, 2, x, x, 2, 0;
  const auto f = build_mst(w);
  CHECK(f.components == 2);
  CHECK(f.disconnected());
  CHECK(f.edges.size() == 2);
}

TEST_CASE("weight matrix validation") {
  Matrix w = Matrix::Zero(3, 3);
  w(0, 1) = 1;
  CHECK_THROWS_AS(build_mst(w), ConfigError);
  CHECK_THROWS_AS(build_mst(Matrix::Zero(1, 1)), ConfigError);
  CHECK_THROWS_AS(build_mst(Matrix::Zero(2, 3)), ConfigError);
}

TEST_CASE("sector clusters of hand trees") {
  // chain A-A-B-B
  auto c = sector_clusters(chain(4), {0, 0, 1, 1}, 2);
  CHECK(c[0] == std::vector<std::size_t>{2});
  CHECK(c[1] == std::vector<std::size_t>{2});
  CHECK(q_mst(c, 4) == 1.0);
  // chain A-B-A-B
  c = sector_clusters(chain(4), {0, 1, 0, 1}, 2);
  CHECK(c[0] == std::vector<std::size_t>{1, 1});
  CHECK(c[1] == std::vector<std::size_t>{1, 1});
  CHECK(q_mst(c, 4) == 0.5);
  // star centred on A with leaves A, B, B
  const std::vector<Edge> star{{0, 1, 1}, {0, 2, 1}, {0, 3, 1}};
  c = sector_clusters(star, {0, 0, 1, 1}, 2);
  CHECK(c[0] == std::vector<std::size_t>{2});
  CHECK(c[1] == std::vector<std::size_t>{1, 1});
  CHECK(q_mst(c, 4) == 0.75);
  CHECK_THROWS_AS(sector_clusters(chain(3), {0, 2, 0}, 2), ConfigError);
}

TEST_CASE("Q bounds on random sector assignments") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + trial % 10;
    const Matrix w = random_symmetric(rng, n);
    const std::size_t m = 1 + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (auto& s : ids) s = static_cast<int>(rng() % m);
    std::size_t used = 0;
    for (std::size_t s = 0; s < m; ++s) used += std::count(ids.begin(), ids.end(), static_cast<int>(s)) > 0;
    const auto r = analyze_mst(w, ids, m);
    CHECK(r.q >= static_cast<double>(used) / n - 1e-15);
    CHECK(r.q <= 1.0);
  }
}

TEST_CASE("Q is invariant under relabeling and permutation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 8;
    const Matrix w = random_symmetric(rng, n);
    std::vector<int> ids(n);
    for (auto& s : ids) s = static_cast<int>(rng() % 3);
    const double q = analyze_mst(w, ids, 3).q;

    std::vector<int> relabeled = ids;
    for (auto& s : relabeled) s = (s + 1) % 3;
    CHECK(analyze_mst(w, relabeled, 3).q == q);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix wp(n, n);
    std::vector<int> idp(n);
    for (int a = 0; a < n; ++a) {
      idp[a] = ids[perm[a]];
      for (int b = 0; b < n; ++b) wp(a, b) = w(perm[a], perm[b]);
    }
    CHECK(analyze_mst(wp, idp, 3).q == q);
  }
}

TEST_CASE("Q extremes") {
  // perfect clustering
  CHECK(q_mst(sector_clusters(chain(6), {0, 0, 0, 1, 1, 2}, 3), 6) == 1.0);
  // fully dispersed: M / N
  CHECK(q_mst(sector_clusters(chain(6), {0, 1, 2, 0, 1, 2}, 3), 6) == doctest::Approx(3.0 / 6.0));
  // an empty sector contributes nothing
  CHECK(q_mst(sector_clusters(chain(4), {0, 0, 2, 2}, 3), 4) == 1.0);
  CHECK_THROWS_AS(q_mst({}, 0), ConfigError);
}

TEST_CASE("coupling cutoff on a hand-built six-node case") {
  // A = {0,1,2}, B = {3,4,5}; node 2 hangs on B through a strong bridge
  Matrix j = Matrix::Constant(6, 6, 0.01);
  j.diagonal().setZero();
  auto set = [&](int a, int b, double v) { j(a, b) = j(b, a) = v; };
  set(2, 3, 0.9);
  set(0, 3, 0.6);
  set(0, 1, 0.5);
  set(3, 4, 0.5);
  set(4, 5, 0.4);
  set(1, 2, 0.2);
  const std::vector<int> ids{0, 0, 0, 1, 1, 1};
  CHECK(analyze_mst(j, ids, 2).q == doctest::Approx(5.0 / 6.0));
  const auto scan = coupling_cutoff_scan(j, ids, 2, {0.8, 1.0}, CutoffDirection::DiscardAbove);
  REQUIRE(scan.size() == 2);
  // bridge gone: node 2 rejoins A through its weak intra link
  CHECK(scan[0].q == doctest::Approx(1.0));
  CHECK(scan[0].kept == 14);
  CHECK(scan[1].q == doctest::Approx(5.0 / 6.0));
  CHECK(scan[1].kept == 15);
  const auto below = coupling_cutoff_scan(j, ids, 2, {-1.0}, CutoffDirection::DiscardBelow);
  CHECK(below[0].q == doctest::Approx(5.0 / 6.0));
  CHECK_THROWS_AS(coupling_cutoff_scan(j, ids, 2, {1.0, 0.5}, CutoffDirection::DiscardAbove), ConfigError);
  CHECK_THROWS_AS(coupling_cutoff_scan(j, ids, 2, {-1.0}, CutoffDirection::DiscardAbove), NumericError);
}

TEST_CASE("coupling cutoff can disconnect the tree") {
  Matrix j(4, 4);
  j << 0, 0.5, -0.1, -0.1, 0.5, 0, -0.1, -0.1, -0.1, -0.1, 0, 0.5, -0.1, -0.1, 0.5, 0;
  const auto scan = coupling_cutoff_scan(j, {0, 0, 1, 1}, 2, {0.0}, CutoffDirection::DiscardBelow);
  CHECK(scan[0].disconnected);
  CHECK(scan[0].q == 1.0);
  CHECK(scan[0].kept == 2);
}

TEST_CASE("spectral truncation identities") {
  std::mt19937_64 rng(12);
  const Matrix j = random_symmetric(rng, 7);
  std::size_t kept = 0;
  const Matrix all = truncate_spectrum(j, 1e9, CutoffDirection::DiscardAbove, &kept);
  CHECK(kept == 7);
  CHECK((all - j).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(all.diagonal().isZero(0.0));

  Vector v(5);
  v << 0.3, -0.5, 0.2, 0.7, 0.1;
  const Matrix r1 = v * v.transpose();  // rank one, diagonal v^2
  const Matrix top = truncate_spectrum(r1, 0.5 * v.squaredNorm(), CutoffDirection::DiscardBelow, &kept);
  CHECK(kept == 1);
  Matrix expect = r1;
  expect.diagonal().setZero();
  CHECK((top - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(top == top.transpose());
  CHECK_THROWS_AS(truncate_spectrum(j, -1e9, CutoffDirection::DiscardAbove), NumericError);
}

TEST_CASE("eigen cutoff keeping everything leaves Q unchanged") {
  std::mt19937_64 rng(3);
  const Matrix j = random_symmetric(rng, 9);
  std::vector<int> ids{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const auto scan = eigen_cutoff_scan(j, ids, 3, {1e9}, CutoffDirection::DiscardAbove);
  CHECK(scan[0].q == analyze_mst(j, ids, 3).q);
  CHECK(scan[0].kept == 9);
}

TEST_CASE("removing the top modes of a block model destroys its clustering") {
  BlockModelSpec spec;
  spec.stocks = 30;
  spec.blocks = 3;
  spec.within_sd = 0.0;  // block structure lives only in the top modes
  spec.seed = 4;
  const auto model = block_model(spec);
  std::vector<int> ids;
  for (std::size_t i = 0; i < 30; ++i) ids.push_back(static_cast<int>(i / 10));
  const Matrix& j = model.params.J;
  CHECK(analyze_mst(j, ids, 3).q == 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  const auto& lam = es.eigenvalues();  // ascending
  const double cut = 0.5 * (lam(26) + lam(27));
  const auto scan = eigen_cutoff_scan(j, ids, 3, {cut}, CutoffDirection::DiscardAbove);
  CHECK(scan[0].kept == 27);
  CHECK(scan[0].q < 0.6);
}

TEST_CASE("random sector baseline") {
  const auto tree = chain(12);
  std::vector<int> ids{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const auto b = random_sector_baseline(tree, ids, 3, 500, 77);
  CHECK(b.trials == 500);
  CHECK(b.mean > 3.0 / 12.0);
  CHECK(b.mean < 1.0);
  CHECK(b.lower <= b.mean);
  CHECK(b.upper >= b.mean);
  CHECK(b.lower >= 3.0 / 12.0);
  const auto again = random_sector_baseline(tree, ids, 3, 500, 77);
  CHECK(again.mean == b.mean);
  CHECK(again.upper == b.upper);
  CHECK_THROWS_AS(random_sector_baseline(tree, ids, 3, 1, 77), ConfigError);
}

TEST_CASE("sector CSV parsing") {
  const auto map = parse_sectors_csv("ticker,name,sector\nAAA,Alpha,Tech\nBBB,Beta,Energy\nCCC,Gamma,Tech\n");
  CHECK(map.sectors() == std::vector<std::string>{"Tech", "Energy"});
  CHECK(map.indices({"CCC", "BBB", "AAA"}) == std::vector<int>{0, 1, 0});
  CHECK(map.sector_of("BBB") == "Energy");
  CHECK_FALSE(map.contains("DDD"));
  try {
    map.indices({"AAA", "DDD"});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("DDD") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_sectors_csv("ticker,industry\nA,B\n"), ConfigError);
  CHECK_THROWS_AS(parse_sectors_csv(""), ConfigError);
}

TEST_CASE("cutoff direction names") {
  CHECK(parse_cutoff_direction(to_string(CutoffDirection::DiscardAbove)) == CutoffDirection::DiscardAbove);
  CHECK(parse_cutoff_direction("below") == CutoffDirection::DiscardBelow);
  CHECK_THROWS_AS(parse_cutoff_direction("sideways"), ConfigError);
}
