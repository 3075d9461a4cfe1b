#include <cmath>
#include <random>

#include "doctest.h"
#include "isingmarket/inference.hpp"
#include "oracle.hpp"

using namespace im;

namespace {

MomentTargets two_spin(double m1, double m2, double c) {
  MomentTargets d;
  d.means = Vector(2);
  d.means << m1, m2;
  d.covariance = Matrix(2, 2);
  d.covariance << 1 - m1 * m1, c, c, 1 - m2 * m2;
  return d;
}

MomentTargets exact_targets(const Vector& h, const Matrix& J) {
  const auto b = oracle::boltzmann(h, J);
  MomentTargets d;
  d.means = b.means;
  d.covariance = b.pairs - b.means * b.means.transpose();
  return d;
}

InferenceConfig with(Method m) {
  InferenceConfig c;
  c.method = m;
  return c;
}

// Moments of a random binary panel, a realistic well-conditioned target.
MomentTargets panel_targets(int n, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix w(n, T);
  for (int t = 0; t < T; ++t) {
    const double market = g(rng);
    for (int i = 0; i < n; ++i) w(i, t) = (0.6 * market + g(rng) + 0.2 > 0) ? 1.0 : -1.0;
  }
  const auto st = window_stats(w);
  return MomentTargets::from(st);
}

}  // namespace

TEST_CASE("method names round trip") {
  for (auto m : {Method::Exact, Method::NMF, Method::TAP, Method::IP, Method::SM}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("plm"), ConfigError);
}

TEST_CASE("config validation") {
  InferenceConfig c;
  CHECK(c.trick());
  c.method = Method::IP;
  CHECK_FALSE(c.trick());
  c.eta_h = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = InferenceConfig{};
  c.tolerance = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = InferenceConfig{};
  c.ridge = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("nMF on two uncorrelated-mean spins") {
  for (double c : {-0.6, -0.2, 0.1, 0.45, 0.8}) {
    const auto d = two_spin(0, 0, c);
    // pair units: K_12 = c / (1 - c^2); the Hamiltonian coupling is half of it
    const Matrix k = pair_coupling::nmf(d.covariance, d.means, 0.0);
    CHECK(k(0, 1) == doctest::Approx(c / (1 - c * c)).epsilon(1e-13));
    const auto r = infer_nmf(d, with(Method::NMF));
    CHECK(r.params.J(0, 1) == doctest::Approx(0.5 * c / (1 - c * c)).epsilon(1e-13));
    CHECK(r.params.h.cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("nMF on a diagonal covariance") {
  MomentTargets d;
  d.means = Vector::Zero(4);
  d.covariance = Matrix::Identity(4, 4);
  const auto r = infer_nmf(d, with(Method::NMF));
  CHECK(r.params.J.isZero(1e-15));
  CHECK(r.params.h.isZero(1e-15));
  CHECK(r.diagnostics.condition_number == doctest::Approx(1.0));
}

TEST_CASE("nMF approaches the true coupling for weak interactions") {
  double prev = INFINITY;
  for (double j : {0.05, 0.01, 0.002}) {
    Matrix J = Matrix::Zero(2, 2);
    J(0, 1) = J(1, 0) = j;
    const auto r = infer_nmf(exact_targets(Vector::Zero(2), J), with(Method::NMF));
    const double rel = std::abs(r.params.J(0, 1) - j) / j;
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("nMF fields with and without the diagonal trick") {
  const auto d = panel_targets(5, 400, 3);
  const Matrix k = pair_coupling::nmf(d.covariance, d.means, 0.0);
  auto cfg = with(Method::NMF);
  cfg.diagonal_trick = false;
  const auto off = infer_nmf(d, cfg);
  cfg.diagonal_trick = true;
  const auto on = infer_nmf(d, cfg);
  CHECK(on.params.J == off.params.J);
  for (Eigen::Index i = 0; i < 5; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j)
      if (j != i) s += k(i, j) * d.means(j);
    CHECK(off.params.h(i) == doctest::Approx(std::atanh(d.means(i)) - s).epsilon(1e-12));
    CHECK(on.params.h(i) == doctest::Approx(std::atanh(d.means(i)) - s - k(i, i) * d.means(i)).epsilon(1e-12));
  }
}

TEST_CASE("nMF error paths") {
  MomentTargets d;
  d.means = Vector::Zero(2);
  d.covariance = Matrix::Ones(2, 2);  // singular
  try {
    infer_nmf(d, with(Method::NMF));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("ridge") != std::string::npos);
  }
  auto cfg = with(Method::NMF);
  cfg.ridge = 0.1;
  const auto r = infer_nmf(d, cfg);
  CHECK(r.params.J.allFinite());
  CHECK(std::isfinite(r.diagnostics.condition_number));

  auto sat = two_spin(1.0, 0.0, 0.0);
  CHECK_THROWS_AS(infer_nmf(sat, with(Method::NMF)), NumericError);
}

TEST_CASE("TAP equals nMF at zero magnetization") {
  auto d = panel_targets(6, 500, 8);
  d.means.setZero();
  auto cfg = with(Method::TAP);
  const auto tap = infer_tap(d, cfg);
  cfg.method = Method::NMF;
  const auto nmf = infer_nmf(d, cfg);
  CHECK(tap.params.J == nmf.params.J);
  CHECK(tap.diagnostics.tap_limit_pairs == 15);
  CHECK(tap.diagnostics.tap_fallbacks == 0);
}

TEST_CASE("TAP root solves its quadratic") {
  const auto d = panel_targets(7, 600, 12);
  const auto r = infer_tap(d, with(Method::TAP));
  Eigen::SelfAdjointEigenSolver<Matrix> es(d.covariance);
  const Matrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  CHECK(r.diagnostics.tap_fallbacks == 0);
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = i + 1; j < 7; ++j) {
      const double k = 2.0 * r.params.J(i, j);  // pair units
      const double p = d.means(i) * d.means(j);
      CHECK(std::abs(2 * p * k * k + k + inv(i, j)) < 1e-10);
      // and it is the branch that tends to the nMF value
      CHECK(std::abs(k + inv(i, j)) < std::abs(k - (-1.0 / (2 * p))));
    }
  // root formula equals the textbook expression where the latter is accurate
  const double b = -0.3, mi = 0.4, mj = 0.5;
  const double textbook = (-1.0 + std::sqrt(1.0 - 8 * mi * mj * b)) / (4 * mi * mj);
  CHECK(*pair_coupling::tap_root(b, mi, mj) == doctest::Approx(textbook).epsilon(1e-12));
}

TEST_CASE("TAP falls back to nMF on a negative discriminant") {
  // m_i m_j = 0.25, (C^-1)_12 = 0.3 / (0.5625 - 0.09) > 1/2, so 1 - 8 p b < 0
  const auto d = two_spin(0.5, 0.5, -0.3);
  CHECK_FALSE(pair_coupling::tap_root(0.3 / (0.5625 - 0.09), 0.5, 0.5));
  const auto r = infer_tap(d, with(Method::TAP));
  CHECK(r.diagnostics.tap_fallbacks == 1);
  CHECK(r.params.J.allFinite());
  CHECK(r.params.h.allFinite());
  const auto n = infer_nmf(d, with(Method::NMF));
  CHECK(r.params.J(0, 1) == n.params.J(0, 1));
}

TEST_CASE("TAP fields without the trick include the reaction term") {
  const auto d = panel_targets(4, 500, 2);
  auto cfg = with(Method::TAP);
  cfg.diagonal_trick = false;
  const auto r = infer_tap(d, cfg);
  for (Eigen::Index i = 0; i < 4; ++i) {
    double lin = 0, reaction = 0;
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (j == i) continue;
      const double k = 2 * r.params.J(i, j);
      lin += k * d.means(j);
      reaction += k * k * (1 - d.means(j) * d.means(j));
    }
    CHECK(r.params.h(i) == doctest::Approx(std::atanh(d.means(i)) - lin + d.means(i) * reaction).epsilon(1e-12));
  }
  cfg.diagonal_trick = true;
  const auto with_trick = infer_tap(d, cfg);
  auto ncfg = with(Method::NMF);
  CHECK((with_trick.params.h - infer_nmf(d, ncfg).params.h).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("IP closed forms") {
  for (double c : {-0.7, -0.1, 0.0, 0.3, 0.9}) {
    const auto r = infer_ip(two_spin(0, 0, c), with(Method::IP));
    CHECK(2.0 * r.params.J(0, 1) == doctest::Approx(std::atanh(c)).epsilon(1e-13));
    CHECK(r.params.h.cwiseAbs().maxCoeff() < 1e-15);
  }
  // inconsistent table names the pair
  try {
    infer_ip(two_spin(0.5, 0.5, -0.3), with(Method::IP));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
  }
}

TEST_CASE("IP and SM couplings are exact for two spins at any magnetization") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 25; ++trial) {
    Vector h(2);
    h << u(rng), u(rng);
    Matrix J = Matrix::Zero(2, 2);
    J(0, 1) = J(1, 0) = u(rng);
    const auto d = exact_targets(h, J);
    for (auto m : {Method::IP, Method::SM}) {
      const auto r = infer(d, with(m));
      CHECK(std::abs(r.params.J(0, 1) - J(0, 1)) < 1e-10);
    }
  }
  // zero fields are recovered as zero
  Matrix J = Matrix::Zero(2, 2);
  J(0, 1) = J(1, 0) = 0.37;
  for (auto m : {Method::IP, Method::SM}) CHECK(infer(exact_targets(Vector::Zero(2), J), with(m)).params.h.isZero(1e-14));
}

TEST_CASE("SM closed forms and identity") {
  for (double c : {-0.5, 0.0, 0.4}) {
    const auto r = infer_sm(two_spin(0, 0, c), with(Method::SM));
    CHECK(2.0 * r.params.J(0, 1) == doctest::Approx(std::atanh(c)).epsilon(1e-13));
  }
  const auto d = panel_targets(10, 800, 44);
  const auto sm = infer_sm(d, with(Method::SM));
  const auto ip = infer_ip(d, with(Method::IP));
  const Matrix k_nmf = pair_coupling::nmf(d.covariance, d.means, 0.0);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = i + 1; j < 10; ++j) {
      const double corr = d.covariance(i, j) /
                          ((1 - d.means(i) * d.means(i)) * (1 - d.means(j) * d.means(j)) - d.covariance(i, j) * d.covariance(i, j));
      CHECK(std::abs(2 * sm.params.J(i, j) - 2 * ip.params.J(i, j) - k_nmf(i, j) + corr) < 1e-12);
    }
  CHECK(sm.params.h == ip.params.h);
  CHECK_THROWS_AS(pair_coupling::sm_correction(0.0, 0.0, 1.0), NumericError);
}

TEST_CASE("every method returns symmetric zero-diagonal finite parameters") {
  const auto d = panel_targets(8, 700, 5);
  for (auto m : {Method::NMF, Method::TAP, Method::IP, Method::SM, Method::Exact}) {
    auto cfg = with(m);
    cfg.max_iters = 50;
    const auto r = infer(d, cfg);
    CHECK(r.method == m);
    CHECK(r.params.J == r.params.J.transpose());
    CHECK(r.params.J.diagonal().isZero(0.0));
    CHECK(r.params.J.allFinite());
    CHECK(r.params.h.allFinite());
    CHECK_NOTHROW(r.params.validate());
  }
}

TEST_CASE("post-hoc residual for closed-form methods") {
  const auto d = panel_targets(5, 600, 9);
  auto cfg = with(Method::SM);
  CHECK_FALSE(infer(d, cfg).residual);
  cfg.post_hoc_residual = true;
  const auto r = infer(d, cfg);
  REQUIRE(r.residual);
  CHECK(*r.residual == doctest::Approx(moment_residual(r.params, d, cfg)));
}

TEST_CASE("exact learning fixed points") {
  SUBCASE("independent unbiased spins") {
    MomentTargets d;
    d.means = Vector::Zero(3);
    d.covariance = Matrix::Identity(3, 3);
    const auto r = infer_exact(d, with(Method::Exact));
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.params.h.isZero(1e-15));
    CHECK(r.params.J.isZero(1e-15));
  }
  SUBCASE("two spins with <s1 s2> = tanh(1)") {
    auto cfg = with(Method::Exact);
    cfg.tolerance = 1e-10;
    cfg.eta_decay = 1.0;
    cfg.eta_J = 0.5;
    cfg.max_iters = 20000;
    const auto r = infer_exact(two_spin(0, 0, std::tanh(1.0)), cfg);
    CHECK(r.converged);
    CHECK(r.diagnostics.enumeration_used);
    CHECK(r.params.J(0, 1) == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("exact learning reproduces the data moments") {
  std::mt19937_64 rng(23);
  Vector h;
  Matrix J;
  oracle::random_model(rng, 5, 0.5, h, J);
  const auto d = exact_targets(h, J);
  auto cfg = with(Method::Exact);
  cfg.tolerance = 1e-8;
  cfg.eta_decay = 1.0;
  cfg.eta_h = cfg.eta_J = 0.2;
  cfg.max_iters = 20000;
  const auto r = infer_exact(d, cfg);
  REQUIRE(r.converged);
  REQUIRE(r.residual);
  CHECK(*r.residual < 1e-8);
  CHECK(r.diagnostics.initialization == "nmf");
  const auto back = oracle::boltzmann(r.params.h, r.params.J);
  CHECK((back.means - d.means).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r.params.J - J).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((r.params.h - h).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("exact learning residual settles into a non-increasing sequence") {
  int monotone_runs = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Vector h;
    Matrix J;
    oracle::random_model(rng, 4, 0.4, h, J);
    auto cfg = with(Method::Exact);
    cfg.eta_h = cfg.eta_J = 0.05;
    cfg.eta_decay = 1.0;
    cfg.tolerance = 1e-9;
    cfg.max_iters = 400;
    const auto r = infer_exact(exact_targets(h, J), cfg);
    const auto& hist = r.diagnostics.residual_history;
    std::size_t ups = 0;
    for (std::size_t k = 20; k + 1 < hist.size(); ++k) ups += hist[k + 1] > hist[k] * (1 + 1e-12);
    monotone_runs += ups == 0;
    CHECK(hist.back() < hist.front());
  }
  CHECK(monotone_runs >= 8);
}

TEST_CASE("exact learning with sampled moments is seeded and flags non-convergence") {
  const auto d = panel_targets(6, 500, 31);
  auto cfg = with(Method::Exact);
  cfg.model_moments = ModelMoments::MonteCarlo;
  cfg.mc.sweeps = 2000;
  cfg.mc.chains = 2;
  cfg.mc.burnin = 100;
  cfg.max_iters = 5;
  cfg.tolerance = 1e-6;  // unreachable with this budget
  const auto a = infer_exact(d, cfg);
  const auto b = infer_exact(d, cfg);
  CHECK_FALSE(a.converged);
  CHECK_FALSE(a.diagnostics.enumeration_used);
  CHECK(a.iterations == 5);
  CHECK(a.params.J == b.params.J);
  CHECK(a.diagnostics.residual_history.size() == 6);
  CHECK(*a.residual == a.diagnostics.residual_history.back());
}

TEST_CASE("exact learning divergence detector") {
  // absurd learning rates on a strongly coupled target make the iteration blow up
  const auto d = two_spin(0.3, -0.2, 0.5);
  auto cfg = with(Method::Exact);
  cfg.eta_h = cfg.eta_J = 50.0;
  cfg.eta_decay = 1.0;
  cfg.tolerance = 1e-12;
  cfg.max_iters = 5000;
  const auto r = infer_exact(d, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.diagnostics.diverged);
  CHECK(r.iterations < 5000);
}
