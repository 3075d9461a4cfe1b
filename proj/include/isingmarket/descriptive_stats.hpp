#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isingmarket/common.hpp"

namespace im {

/// Dense symmetric rank-3 tensor of size n x n x n.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(std::size_t n) : n_(n), data_(n * n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * n_ + j) * n_ + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * n_ + j) * n_ + k]; }
  const std::vector<double>& data() const { return data_; }

  /// Entries with i < j < k; the distinct off-diagonal third-order values.
  std::vector<double> strict_upper() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Per-window sample statistics with population (1/T) normalization.
struct WindowStats {
  Vector means;
  Matrix covariance;
  Matrix correlation;
  Vector volatility;
  Vector skewness;
  Vector kurtosis;  // excess
  Vector eigenvalues;   // of the covariance, descending
  Matrix eigenvectors;  // columns, matching eigenvalues
  std::optional<Tensor3> third_order;
  std::size_t samples = 0;

  std::size_t series() const { return static_cast<std::size_t>(means.size()); }
  /// <s_i s_j> = C_ij + m_i m_j.
  Matrix pair_moments() const { return covariance + means * means.transpose(); }
};

struct WindowStatsOptions {
  bool with_third_order = false;
  std::size_t max_third_order_series = 128;
  std::vector<std::string> tickers;  // used only to name series in errors
};

WindowStats window_stats(const Eigen::Ref<const Matrix>& window, const WindowStatsOptions& opts = {});

/// Central third moments <(s_i-m_i)(s_j-m_j)(s_k-m_k)> of the rows.
Tensor3 third_order_central(const Eigen::Ref<const Matrix>& window);

enum class Statistic { Mean, Std, Skew, Kurt };
std::string to_string(Statistic s);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::size_t redrawn = 0;
};

struct MomentSummary {
  double mean = 0.0;
  double std = 0.0;
  double skew = 0.0;
  double kurt = 0.0;
  bool higher_defined = true;  // false when std == 0; skew/kurt are then reported as 0
  std::size_t count = 0;
  std::optional<Interval> mean_ci, std_ci, skew_ci, kurt_ci;

  double get(Statistic s) const;
};

MomentSummary summarize(std::span<const double> values);

/// Moments of the off-diagonal entries. Symmetric matrices contribute each
/// unordered pair once; otherwise all N(N-1) entries are used.
MomentSummary off_diagonal_summary(const Eigen::Ref<const Matrix>& m);
std::vector<double> off_diagonal_values(const Eigen::Ref<const Matrix>& m);

/// Percentile bootstrap. Resamples on which the statistic is undefined
/// (zero spread for skew/kurt) are redrawn and counted.
Interval bootstrap_ci(std::span<const double> values, Statistic statistic, std::size_t resamples, double level,
                      std::uint64_t seed);

/// Fills every CI of the summary from `values`.
void attach_bootstrap(MomentSummary& summary, std::span<const double> values, std::size_t resamples, double level,
                      std::uint64_t seed);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// |DFT_k| / L for k = 0..floor(L/2).
std::vector<double> dft_amplitudes(std::span<const double> series);

enum class SpectrumOf { Covariance, Correlation };

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

/// Top-k eigenpairs of a symmetric matrix, descending, each eigenvector with
/// its largest-magnitude entry made positive.
std::vector<EigenPair> eigen_top(const Eigen::Ref<const Matrix>& symmetric, std::size_t k);
std::vector<EigenPair> eigen_top(const WindowStats& stats, std::size_t k, SpectrumOf which = SpectrumOf::Correlation);

}  // namespace im
