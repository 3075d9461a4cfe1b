#include "isingmarket/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace im {

std::string to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::NMF: return "nmf";
    case Method::TAP: return "tap";
    case Method::IP: return "ip";
    case Method::SM: return "sm";
  }
  return "nmf";
}

Method parse_method(const std::string& text) {
  if (text == "exact") return Method::Exact;
  if (text == "nmf") return Method::NMF;
  if (text == "tap") return Method::TAP;
  if (text == "ip") return Method::IP;
  if (text == "sm") return Method::SM;
  throw ConfigError("unknown inference method '" + text + "' (expected exact|nmf|tap|ip|sm)");
}

void InferenceConfig::validate() const {
  if (!(eta_h > 0.0) || !(eta_J > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(eta_decay > 0.0 && eta_decay <= 1.0)) throw ConfigError("eta decay must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ConfigError("moment tolerance must be positive");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
}

MomentTargets MomentTargets::from(const WindowStats& stats, std::vector<std::string> tickers) {
  return MomentTargets{stats.means, stats.covariance, std::move(tickers)};
}

MomentTargets MomentTargets::from(const SampleStats& stats, std::vector<std::string> tickers) {
  return MomentTargets{stats.means, stats.covariance(), std::move(tickers)};
}

namespace {

std::string pair_name(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

void check_targets(const MomentTargets& d) {
  const auto n = d.means.size();
  if (n < 1) throw ConfigError("inference: empty moment targets");
  if (d.covariance.rows() != n || d.covariance.cols() != n) throw ConfigError("inference: covariance shape mismatch");
  if (!d.means.allFinite() || !d.covariance.allFinite()) throw NumericError("inference: non-finite moments");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(std::abs(d.means(i)) < 1.0))
      throw NumericError("inference: |<s_" + std::to_string(i) + ">| = 1, field diverges (atanh)");
}

// Pair-unit couplings K -> Hamiltonian couplings J = K / 2, exactly symmetric,
// zero diagonal.
IsingParams to_params(const Matrix& k, Vector h, const std::vector<std::string>& tickers) {
  const Eigen::Index n = k.rows();
  Matrix j = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) j(a, b) = j(b, a) = 0.25 * (k(a, b) + k(b, a));
  IsingParams p(std::move(h), std::move(j), tickers);
  if (!p.h.allFinite() || !p.J.allFinite()) throw NumericError("inference produced non-finite parameters");
  return p;
}

// h_i = atanh(m_i) - sum_{j != i} K_ij m_j  [ - K_ii m_i with the diagonal trick ]
Vector mean_field_fields(const Matrix& k, const Vector& m, bool include_diagonal) {
  const Eigen::Index n = m.size();
  Vector h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i || include_diagonal) s += k(i, j) * m(j);
    h(i) = std::atanh(m(i)) - s;
  }
  return h;
}

void finish_closed_form(InferenceResult& r, const MomentTargets& d, const InferenceConfig& cfg) {
  r.converged = true;
  r.iterations = 0;
  if (cfg.post_hoc_residual) r.residual = moment_residual(r.params, d, cfg);
}

double max_residual(const Vector& dm, const Matrix& dp) {
  double r = dm.cwiseAbs().maxCoeff();
  const Eigen::Index n = dp.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) r = std::max(r, std::abs(dp(i, j)));
  return r;
}

SampleStats model_moments(const IsingParams& p, const InferenceConfig& cfg, std::uint64_t stream, bool& enumerated) {
  const bool enumerate =
      cfg.model_moments == ModelMoments::Enumeration ||
      (cfg.model_moments == ModelMoments::Auto && p.size() <= std::min(cfg.enumeration_max_series, kMaxExactSeries));
  enumerated = enumerate;
  if (enumerate) return exact_moments_small(p);
  McSettings mc = cfg.mc;
  mc.seed = derive_seed(cfg.mc.seed, stream);
  mc.third_order = false;
  mc.histogram = false;
  mc.keep_samples = false;
  return metropolis_sample(p, mc);
}

}  // namespace

namespace pair_coupling {

Matrix nmf(const Matrix& covariance, const Vector& means, double ridge, double* condition_number) {
  const Eigen::Index n = covariance.rows();
  Matrix c = covariance + ridge * Matrix::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  const double lmin = lam.minCoeff();
  if (condition_number) *condition_number = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 1e-12 * std::max(lmax, 1e-300)))
    throw NumericError("covariance matrix is singular or not positive definite (min eigenvalue " + std::to_string(lmin) +
                       "); use a window with T >= N or set a ridge (--ridge)");
  Matrix inv = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  inv = (0.5 * (inv + inv.transpose())).eval();
  Matrix k = -inv;
  for (Eigen::Index i = 0; i < n; ++i) k(i, i) += 1.0 / (1.0 - means(i) * means(i));
  return k;
}

std::optional<double> tap_root(double inv_cov_ij, double mi, double mj) {
  const double p = mi * mj;
  const double disc = 1.0 - 8.0 * p * inv_cov_ij;
  if (disc < 0.0) return std::nullopt;
  // [-1 + sqrt(disc)] / (4 p), rewritten to stay accurate as p -> 0.
  return -2.0 * inv_cov_ij / (1.0 + std::sqrt(disc));
}

double independent_pair(double mi, double mj, double cij, std::size_t i, std::size_t j) {
  const double cs = cij + mi * mj;
  const double a = 1.0 + mi + mj + cs;
  const double b = 1.0 - mi - mj + cs;
  const double c = 1.0 - mi + mj - cs;
  const double d = 1.0 + mi - mj - cs;
  if (!(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0))
    throw NumericError("independent-pair coupling undefined for pair " + pair_name(i, j) +
                       ": a cell of the joint +/-1 table is empty or negative");
  return 0.25 * std::log((a * b) / (c * d));
}

double sm_correction(double mi, double mj, double cij, std::size_t i, std::size_t j) {
  const double den = (1.0 - mi * mi) * (1.0 - mj * mj) - cij * cij;
  if (std::abs(den) < 1e-14) throw NumericError("Sessak-Monasson correction denominator vanishes for pair " + pair_name(i, j));
  return cij / den;
}

}  // namespace pair_coupling

InferenceResult infer_nmf(const MomentTargets& d, const InferenceConfig& cfg) {
  cfg.validate();
  check_targets(d);
  InferenceResult r;
  r.method = Method::NMF;
  Matrix k = pair_coupling::nmf(d.covariance, d.means, cfg.ridge, &r.diagnostics.condition_number);
  r.params = to_params(k, mean_field_fields(k, d.means, cfg.trick()), d.tickers);
  finish_closed_form(r, d, cfg);
  return r;
}

InferenceResult infer_tap(const MomentTargets& d, const InferenceConfig& cfg) {
  cfg.validate();
  check_targets(d);
  InferenceResult r;
  r.method = Method::TAP;
  const Eigen::Index n = d.means.size();
  const Vector& m = d.means;
  Matrix k_nmf = pair_coupling::nmf(d.covariance, m, cfg.ridge, &r.diagnostics.condition_number);
  Matrix k = k_nmf;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double inv_ij = -k_nmf(i, j);
      double v;
      if (std::abs(m(i) * m(j)) < 1e-8) {
        v = -inv_ij;
        ++r.diagnostics.tap_limit_pairs;
      } else if (auto root = pair_coupling::tap_root(inv_ij, m(i), m(j))) {
        v = *root;
      } else {
        v = -inv_ij;
        ++r.diagnostics.tap_fallbacks;
      }
      k(i, j) = k(j, i) = v;
    }

  Vector h;
  if (cfg.trick()) {
    h = mean_field_fields(k_nmf, m, true);
  } else {
    h.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double lin = 0.0, onsager = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        lin += k(i, j) * m(j);
        onsager += k(i, j) * k(i, j) * (1.0 - m(j) * m(j));
      }
      h(i) = std::atanh(m(i)) - lin + m(i) * onsager;
    }
  }
  r.params = to_params(k, std::move(h), d.tickers);
  finish_closed_form(r, d, cfg);
  return r;
}

namespace {

Matrix independent_pair_matrix(const MomentTargets& d) {
  const Eigen::Index n = d.means.size();
  Matrix k = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      k(i, j) = k(j, i) = pair_coupling::independent_pair(d.means(i), d.means(j), d.covariance(i, j),
                                                          static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return k;
}

}  // namespace

InferenceResult infer_ip(const MomentTargets& d, const InferenceConfig& cfg) {
  cfg.validate();
  check_targets(d);
  InferenceResult r;
  r.method = Method::IP;
  Matrix k = independent_pair_matrix(d);
  r.params = to_params(k, mean_field_fields(k, d.means, false), d.tickers);
  finish_closed_form(r, d, cfg);
  return r;
}

InferenceResult infer_sm(const MomentTargets& d, const InferenceConfig& cfg) {
  cfg.validate();
  check_targets(d);
  InferenceResult r;
  r.method = Method::SM;
  const Eigen::Index n = d.means.size();
  const Vector& m = d.means;
  Matrix k_pair = independent_pair_matrix(d);
  Vector h = mean_field_fields(k_pair, m, false);
  Matrix k = Matrix::Zero(n, n);
  if (n > 1) {
    Matrix k_nmf = pair_coupling::nmf(d.covariance, m, cfg.ridge, &r.diagnostics.condition_number);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        k(i, j) = k(j, i) = k_nmf(i, j) + k_pair(i, j) -
                            pair_coupling::sm_correction(m(i), m(j), d.covariance(i, j), static_cast<std::size_t>(i),
                                                         static_cast<std::size_t>(j));
  }
  r.params = to_params(k, std::move(h), d.tickers);
  finish_closed_form(r, d, cfg);
  return r;
}

InferenceResult infer_exact(const MomentTargets& d, const InferenceConfig& cfg) {
  cfg.validate();
  check_targets(d);
  InferenceResult r;
  r.method = Method::Exact;
  const Eigen::Index n = d.means.size();

  IsingParams p;
  try {
    InferenceConfig init = cfg;
    init.method = Method::NMF;
    init.diagonal_trick = true;
    init.post_hoc_residual = false;
    InferenceResult start = infer_nmf(d, init);
    p = std::move(start.params);
    r.diagnostics.condition_number = start.diagnostics.condition_number;
    r.diagnostics.initialization = "nmf";
  } catch (const NumericError&) {
    Vector h(n);
    for (Eigen::Index i = 0; i < n; ++i) h(i) = std::atanh(d.means(i));
    p = IsingParams(std::move(h), Matrix::Zero(n, n), d.tickers);
    r.diagnostics.initialization = "independent";
  }

  const Matrix target_pairs = d.pair_moments();
  double eta_h = cfg.eta_h, eta_j = cfg.eta_J;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_streak = 0;
  r.converged = false;
  for (std::size_t it = 0;; ++it) {
    bool enumerated = false;
    SampleStats model = model_moments(p, cfg, it, enumerated);
    r.diagnostics.enumeration_used = enumerated;
    const Vector dm = d.means - model.means;
    const Matrix dp = target_pairs - model.pair_moments;
    const double res = max_residual(dm, dp);
    r.diagnostics.residual_history.push_back(res);
    r.residual = res;
    r.iterations = it;
    best = std::min(best, res);
    if (res < cfg.tolerance) {
      r.converged = true;
      break;
    }
    bad_streak = res > 10.0 * best ? bad_streak + 1 : 0;
    if (bad_streak >= 50) {
      r.diagnostics.diverged = true;
      break;
    }
    if (it >= cfg.max_iters) break;
    p.h += eta_h * dm;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double step = eta_j * 0.5 * (dp(i, j) + dp(j, i));
        p.J(i, j) += step;
        p.J(j, i) = p.J(i, j);
      }
    eta_h *= cfg.eta_decay;
    eta_j *= cfg.eta_decay;
  }
  r.diagnostics.min_residual = best;
  if (!p.h.allFinite() || !p.J.allFinite()) throw NumericError("exact learning produced non-finite parameters");
  r.params = std::move(p);
  return r;
}

InferenceResult infer(const MomentTargets& data, const InferenceConfig& cfg) {
  switch (cfg.method) {
    case Method::Exact: return infer_exact(data, cfg);
    case Method::NMF: return infer_nmf(data, cfg);
    case Method::TAP: return infer_tap(data, cfg);
    case Method::IP: return infer_ip(data, cfg);
    case Method::SM: return infer_sm(data, cfg);
  }
  throw ConfigError("unknown method");
}

double moment_residual(const IsingParams& params, const MomentTargets& data, const InferenceConfig& cfg) {
  bool enumerated = false;
  SampleStats model = model_moments(params, cfg, 0xFFFF, enumerated);
  return max_residual(data.means - model.means, data.pair_moments() - model.pair_moments);
}

}  // namespace im
