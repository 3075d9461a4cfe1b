#include <cmath>
#include <random>

#include "doctest.h"
#include "isingmarket/ising_core.hpp"
#include "oracle.hpp"

using namespace im;

namespace {

IsingParams random_params(int n, double a, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector h;
  Matrix J;
  oracle::random_model(rng, n, a, h, J);
  return IsingParams(h, J);
}

Spins random_spins(std::size_t n, std::mt19937_64& rng) {
  Spins s(n);
  for (auto& x : s) x = (rng() & 1) ? 1 : -1;
  return s;
}

}  // namespace

TEST_CASE("params validation") {
  Matrix J = Matrix::Zero(2, 2);
  CHECK_NOTHROW(IsingParams(Vector::Zero(2), J).validate());
  J(0, 1) = 0.3;
  CHECK_THROWS_AS(IsingParams(Vector::Zero(2), J).validate(), ConfigError);  // asymmetric
  J(1, 0) = 0.3;
  J(0, 0) = 0.1;
  CHECK_THROWS_AS(IsingParams(Vector::Zero(2), J).validate(), ConfigError);  // diagonal
  J(0, 0) = 0.0;
  CHECK_THROWS_AS(IsingParams(Vector::Zero(3), J).validate(), ConfigError);  // size
  J(0, 1) = J(1, 0) = NAN;
  CHECK_THROWS_AS(IsingParams(Vector::Zero(2), J).validate(), ConfigError);
}

TEST_CASE("hamiltonian basics") {
  const IsingParams zero(Vector::Zero(3), Matrix::Zero(3, 3));
  const Spins s{1, -1, 1};
  CHECK(hamiltonian(zero, s) == 0.0);

  Matrix J = Matrix::Zero(2, 2);
  J(0, 1) = J(1, 0) = 0.4;
  const IsingParams two(Vector::Zero(2), J);
  const Spins up{1, 1};
  CHECK(hamiltonian(two, up) == doctest::Approx(-0.8));
  CHECK_THROWS_AS(hamiltonian(two, Spins{1, 1, 1}), ConfigError);
}

TEST_CASE("hamiltonian matches the explicit double sum") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(6, 1.0, static_cast<std::uint64_t>(trial));
    const auto s = random_spins(6, rng);
    double e = 0.0;
    for (int i = 0; i < 6; ++i) {
      e -= p.h(i) * s[static_cast<std::size_t>(i)];
      for (int j = 0; j < 6; ++j) e -= p.J(i, j) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
    }
    CHECK(hamiltonian(p, s) == doctest::Approx(e).epsilon(1e-13));
  }
}

TEST_CASE("flip delta equals full recomputation") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_params(7, 1.0, 100 + static_cast<std::uint64_t>(trial));
    auto s = random_spins(7, rng);
    const std::size_t i = rng() % 7;
    const double before = hamiltonian(p, s);
    const double delta = flip_delta(p, s, i);
    s[i] = static_cast<std::int8_t>(-s[i]);
    CHECK(delta == doctest::Approx(hamiltonian(p, s) - before).epsilon(1e-12));
  }
}

TEST_CASE("zero field makes the energy even under a global flip") {
  std::mt19937_64 rng(1);
  auto p = random_params(5, 1.0, 3);
  p.h.setZero();
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_spins(5, rng);
    auto f = s;
    for (auto& x : f) x = static_cast<std::int8_t>(-x);
    CHECK(hamiltonian(p, s) == hamiltonian(p, f));
  }
}

TEST_CASE("exact moments on small closed forms") {
  // N = 1: <s> = tanh(h)
  const IsingParams one(Vector::Constant(1, 0.7), Matrix::Zero(1, 1));
  CHECK(exact_moments_small(one).means(0) == doctest::Approx(std::tanh(0.7)).epsilon(1e-14));

  // N = 2, h = 0: <s1 s2> = tanh(2 j)
  for (double j : {-0.8, -0.1, 0.25, 0.5, 1.3}) {
    Matrix J = Matrix::Zero(2, 2);
    J(0, 1) = J(1, 0) = j;
    const auto st = exact_moments_small(IsingParams(Vector::Zero(2), J));
    CHECK(st.pair_moments(0, 1) == doctest::Approx(std::tanh(2.0 * j)).epsilon(1e-14));
    CHECK(st.exact);
  }

  // h = 0: means vanish exactly
  auto p = random_params(6, 1.0, 11);
  p.h.setZero();
  const auto st = exact_moments_small(p);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(st.means(i)) < 1e-15);
}

TEST_CASE("exact moments agree with the brute-force Boltzmann oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_params(5, 1.0, seed);
    ExactOptions opts;
    opts.third_order = true;
    opts.distribution = true;
    const auto st = exact_moments_small(p, opts);
    const auto ref = oracle::boltzmann(p.h, p.J);
    CHECK((st.means - ref.means).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((st.pair_moments - ref.pairs).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t b = 0; b < ref.prob.size(); ++b) CHECK(st.state_distribution[b] == doctest::Approx(ref.prob[b]).epsilon(1e-11));
    REQUIRE(st.third_order);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t k = 0; k < 5; ++k)
          CHECK(std::abs((*st.third_order)(i, j, k) - ref.third[(i * 5 + j) * 5 + k]) < 1e-12);
    CHECK(log_partition_small(p) == doctest::Approx(std::log(ref.Z)).epsilon(1e-12));
    CHECK((st.pair_moments.diagonal().array() == 1.0).all());
  }
}

TEST_CASE("exact enumeration guard") {
  const IsingParams big(Vector::Zero(21), Matrix::Zero(21, 21));
  CHECK_THROWS_AS(exact_moments_small(big), ConfigError);
  CHECK_THROWS_AS(log_partition_small(big), ConfigError);
}

TEST_CASE("metropolis single spin matches tanh(h)") {
  const IsingParams one(Vector::Constant(1, 0.5), Matrix::Zero(1, 1));
  McSettings mc;
  mc.sweeps = 200000;
  mc.seed = 5;
  const auto st = metropolis_sample(one, mc);
  CHECK(std::abs(st.means(0) - std::tanh(0.5)) < 3.0 * st.means_se(0));
  CHECK(st.means_se(0) > 0.0);
  CHECK(st.sample_count == 200000);
}

TEST_CASE("metropolis matches exact moments within sampling error") {
  const auto p = random_params(4, 0.6, 42);
  McSettings mc;
  mc.sweeps = 200000;
  mc.seed = 7;
  mc.histogram = true;
  const auto st = metropolis_sample(p, mc);
  const auto ex = exact_moments_small(p, ExactOptions{false, true});
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(std::abs(st.means(i) - ex.means(i)) < 4.0 * st.means_se(i) + 1e-3);
    for (Eigen::Index j = i + 1; j < 4; ++j)
      CHECK(std::abs(st.pair_moments(i, j) - ex.pair_moments(i, j)) < 4.0 * st.pair_se(i, j) + 1e-3);
  }
  double tv = 0.0;
  for (std::size_t b = 0; b < 16; ++b) tv += 0.5 * std::abs(st.state_distribution[b] - ex.state_distribution[b]);
  CHECK(tv < 0.01);
  CHECK(st.pair_moments == st.pair_moments.transpose());
  CHECK((st.pair_moments.diagonal().array() == 1.0).all());
  CHECK((st.means.array().abs() <= 1.0).all());
}

TEST_CASE("metropolis total variation shrinks with more sweeps") {
  const auto p = random_params(3, 0.8, 3);
  const auto ex = exact_moments_small(p, ExactOptions{false, true});
  auto tv_at = [&](std::size_t sweeps) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      McSettings mc;
      mc.sweeps = sweeps;
      mc.chains = 5;
      mc.seed = seed;
      mc.histogram = true;
      const auto st = metropolis_sample(p, mc);
      for (std::size_t b = 0; b < 8; ++b) acc += 0.5 * std::abs(st.state_distribution[b] - ex.state_distribution[b]);
    }
    return acc / 5.0;
  };
  CHECK(tv_at(100000) < tv_at(1000));
}

TEST_CASE("metropolis is deterministic and independent of the job count") {
  const auto p = random_params(6, 0.5, 8);
  McSettings mc;
  mc.sweeps = 20000;
  mc.chains = 4;
  mc.seed = 99;
  mc.third_order = true;
  const auto a = metropolis_sample(p, mc);
  mc.jobs = 3;
  const auto b = metropolis_sample(p, mc);
  CHECK(a.means == b.means);
  CHECK(a.pair_moments == b.pair_moments);
  CHECK(a.means_se == b.means_se);
  CHECK(a.third_order->data() == b.third_order->data());
  mc.seed = 100;
  CHECK(metropolis_sample(p, mc).means != a.means);
}

TEST_CASE("metropolis with zero field keeps means near zero") {
  auto p = random_params(5, 0.4, 13);
  p.h.setZero();
  McSettings mc;
  mc.sweeps = 100000;
  mc.seed = 2;
  const auto st = metropolis_sample(p, mc);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(st.means(i)) < 4.0 * st.means_se(i) + 1e-3);
}

TEST_CASE("metropolis argument checks") {
  const auto p = random_params(3, 0.5, 1);
  McSettings mc;
  mc.sweeps = 0;
  CHECK_THROWS_AS(metropolis_sample(p, mc), ConfigError);
  mc.sweeps = 10;
  mc.chains = 0;
  CHECK_THROWS_AS(metropolis_sample(p, mc), ConfigError);
}

TEST_CASE("third order from samples") {
  // independent symmetric spins: tensor close to zero
  const IsingParams free(Vector::Zero(4), Matrix::Zero(4, 4));
  McSettings mc;
  mc.sweeps = 100000;
  mc.seed = 3;
  mc.keep_samples = true;
  mc.third_order = true;
  const auto st = metropolis_sample(free, mc);
  REQUIRE(st.samples.cols() == 100000);
  const Tensor3 t = third_order_from_samples(st.samples);
  for (double v : t.data()) CHECK(std::abs(v) < 0.02);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(t(i, j, k) == doctest::Approx(t(k, i, j)).epsilon(1e-12));
        CHECK(t(i, j, k) == doctest::Approx((*st.third_order)(i, j, k)).epsilon(1e-9));
      }
}

TEST_CASE("third order from samples matches the window statistics route") {
  const auto p = random_params(4, 0.7, 21);
  McSettings mc;
  mc.sweeps = 3000;
  mc.seed = 4;
  mc.keep_samples = true;
  const auto st = metropolis_sample(p, mc);
  const Tensor3 a = third_order_from_samples(st.samples);
  const Tensor3 b = third_order_central(st.samples);
  for (std::size_t k = 0; k < a.data().size(); ++k) CHECK(std::abs(a.data()[k] - b.data()[k]) < 1e-12);
}

TEST_CASE("energy split") {
  SUBCASE("zero field") {
    auto p = random_params(5, 1.0, 5);
    p.h.setZero();
    const Vector m = Vector::Constant(5, 0.3);
    const auto e = energy_split(p, m);
    CHECK(e.e_ext == 0.0);
    CHECK(e.energy_ratio == 0.0);
    CHECK_FALSE(std::signbit(e.e_ext));
  }
  SUBCASE("zero couplings") {
    const IsingParams p(Vector::Constant(3, 0.2), Matrix::Zero(3, 3));
    const auto e = energy_split(p, Vector::Constant(3, 0.5));
    CHECK(e.h_int.isZero());
    CHECK(e.e_int == 0.0);
    CHECK_FALSE(e.energy_ratio_finite);
    CHECK_FALSE(e.bias_ratio_finite);
  }
  SUBCASE("identity against the mean-field energy") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto p = random_params(8, 1.0, seed);
      Vector m(8);
      for (auto& x : m) x = u(rng);
      const auto e = energy_split(p, m);
      double direct = 0.0;
      for (int i = 0; i < 8; ++i) {
        direct -= p.h(i) * m(i);
        for (int j = 0; j < 8; ++j) direct -= m(i) * p.J(i, j) * m(j);
      }
      CHECK(std::abs(e.e_ext + e.e_int - direct) < 1e-10);
      CHECK(std::abs(e.e_ext + e.e_int - mean_field_energy(p, m)) < 1e-10);
      CHECK(e.h_ext == p.h);
      CHECK((e.h_int - p.J.transpose() * m).cwiseAbs().maxCoeff() < 1e-14);
      CHECK(e.energy_ratio == doctest::Approx(e.e_ext / e.e_int));
      CHECK(e.bias_ratio == doctest::Approx(p.h.mean() / e.h_int.mean()));
      CHECK(e.bias_ratio_abs == doctest::Approx(std::abs(e.bias_ratio)));
      CHECK(e.bias_ratio_sign == (e.bias_ratio > 0 ? 1 : -1));
    }
  }
  SUBCASE("means outside [-1, 1] are rejected") {
    const auto p = random_params(2, 1.0, 1);
    CHECK_THROWS_AS(energy_split(p, Vector::Constant(2, 1.5)), ConfigError);
  }
}
