#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"
#include "isingmarket/descriptive_stats.hpp"
#include "isingmarket/ising_core.hpp"

namespace im {

enum class Method { Exact, NMF, TAP, IP, SM };

std::string to_string(Method m);
Method parse_method(const std::string& text);

/// Where exact learning gets its model moments from.
enum class ModelMoments { Auto, Enumeration, MonteCarlo };

struct InferenceConfig {
  Method method = Method::NMF;
  /// Defaults to on for nMF and TAP; ignored by the other methods.
  std::optional<bool> diagonal_trick;
  double eta_h = 0.1;
  double eta_J = 0.1;
  double eta_decay = 0.99;  // per-iteration multiplier on both rates
  std::size_t max_iters = 2000;
  double tolerance = 5e-3;  // max-abs moment residual
  McSettings mc;
  double ridge = 0.0;
  ModelMoments model_moments = ModelMoments::Auto;
  std::size_t enumeration_max_series = 16;  // Auto switches to enumeration at or below this N
  bool post_hoc_residual = false;           // closed-form methods: measure the residual afterwards

  bool trick() const { return diagonal_trick.value_or(method == Method::NMF || method == Method::TAP); }
  void validate() const;
};

struct InferenceDiagnostics {
  double condition_number = 0.0;  // of C + ridge I; 0 when not computed
  std::size_t tap_fallbacks = 0;
  std::size_t tap_limit_pairs = 0;  // pairs with |m_i m_j| < 1e-8
  std::string initialization;       // exact learning only
  bool diverged = false;
  bool enumeration_used = false;
  double min_residual = 0.0;
  std::vector<double> residual_history;
};

struct InferenceResult {
  IsingParams params;
  Method method = Method::NMF;
  bool converged = true;
  std::size_t iterations = 0;
  std::optional<double> residual;
  InferenceDiagnostics diagnostics;
};

/// Data moments consumed by the inference routines.
struct MomentTargets {
  Vector means;
  Matrix covariance;
  std::vector<std::string> tickers;

  static MomentTargets from(const WindowStats& stats, std::vector<std::string> tickers = {});
  static MomentTargets from(const SampleStats& stats, std::vector<std::string> tickers = {});
  Matrix pair_moments() const { return covariance + means * means.transpose(); }
};

InferenceResult infer_nmf(const MomentTargets& data, const InferenceConfig& cfg);
InferenceResult infer_tap(const MomentTargets& data, const InferenceConfig& cfg);
InferenceResult infer_ip(const MomentTargets& data, const InferenceConfig& cfg);
InferenceResult infer_sm(const MomentTargets& data, const InferenceConfig& cfg);
InferenceResult infer_exact(const MomentTargets& data, const InferenceConfig& cfg);

/// Dispatches on cfg.method.
InferenceResult infer(const MomentTargets& data, const InferenceConfig& cfg);
inline InferenceResult infer(const WindowStats& stats, const InferenceConfig& cfg,
                             std::vector<std::string> tickers = {}) {
  return infer(MomentTargets::from(stats, std::move(tickers)), cfg);
}

/// Max-abs difference between data moments and the model moments of
/// `params` (enumeration for small N, otherwise Monte Carlo per cfg.mc).
double moment_residual(const IsingParams& params, const MomentTargets& data, const InferenceConfig& cfg);

namespace pair_coupling {

// Closed-form building blocks in pair units: the exponent weight of pair
// (i, j) is K_ij s_i s_j, so K = 2 J. Exposed for testing.

/// A^{-1} - C^{-1}, diagonal included.
Matrix nmf(const Matrix& covariance, const Vector& means, double ridge, double* condition_number = nullptr);
/// Root of 2 m_i m_j K^2 + K + (C^{-1})_ij = 0 that tends to -(C^{-1})_ij.
/// Returns nullopt when the discriminant is negative.
std::optional<double> tap_root(double inv_cov_ij, double mi, double mj);
/// Independent-pair coupling from the 2x2 table implied by (m_i, m_j, C_ij).
double independent_pair(double mi, double mj, double cij, std::size_t i = 0, std::size_t j = 1);
/// C_ij / [(1 - m_i^2)(1 - m_j^2) - C_ij^2].
double sm_correction(double mi, double mj, double cij, std::size_t i = 0, std::size_t j = 1);

}  // namespace pair_coupling

}  // namespace im
