#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"
#include "isingmarket/data_ingest.hpp"
#include "isingmarket/descriptive_stats.hpp"
#include "isingmarket/inference.hpp"
#include "isingmarket/ising_core.hpp"

namespace im {

/// sqrt( mean((x - y)^2) / mean((y - mean(y))^2) ), y is the reference.
double nrmse(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

struct ComparisonReport {
  double nrmse = 0.0;
  double pearson = 0.0;
};

struct ParamsComparison {
  ComparisonReport h;
  ComparisonReport J;  // upper triangle, diagonal excluded
};

/// `b` is the reference.
ParamsComparison compare_methods(const IsingParams& a, const IsingParams& b);

std::vector<double> upper_triangle(const Eigen::Ref<const Matrix>& m);

// ---------------------------------------------------------------------------
// Scaling of parameter-distribution moments with system size.

constexpr std::array<Statistic, 4> kMoments{Statistic::Mean, Statistic::Std, Statistic::Skew, Statistic::Kurt};

struct PowerLawFit {
  double alpha = 0.0;
  double intercept = 0.0;
  double stderr_alpha = 0.0;
  bool defined = true;
};

/// Least squares of log|v| on log n. Undefined when the values change sign
/// or hit zero. Needs at least 3 distinct sizes.
PowerLawFit fit_power_law(std::span<const double> sizes, std::span<const double> values);

struct MomentScaling {
  Statistic moment = Statistic::Mean;
  double alpha = 0.0;        // mean over valid repeats
  double alpha_sd = 0.0;     // spread over valid repeats
  double alpha_se = 0.0;     // alpha_sd / sqrt(valid)
  double fit_se = 0.0;       // mean per-repeat regression standard error
  std::size_t valid = 0;
  std::size_t excluded = 0;  // repeats dropped for sign crossings
  std::vector<double> per_repeat;  // NaN for excluded repeats
  std::vector<std::vector<double>> values;  // [size][repeat] moment values
};

struct ScalingReport {
  std::vector<std::size_t> sizes;
  std::size_t repeats = 0;
  std::vector<MomentScaling> fields;     // moments of h
  std::vector<MomentScaling> couplings;  // moments of off-diagonal J
};

/// Fits each moment of the supplied value collections: values[s][r] holds the
/// collection for size sizes[s] and repeat r.
std::vector<MomentScaling> fit_scaling(const std::vector<std::size_t>& sizes,
                                       const std::vector<std::vector<std::vector<double>>>& values);

struct ScalingConfig {
  std::size_t window_last = 0;  // column index of the window's last day
  std::size_t window_size = 250;
  std::vector<std::size_t> sizes;
  std::size_t repeats = 20;
  InferenceConfig inference;
  std::uint64_t seed = 1;
};

/// Random ticker subsets of each size, inferred and summarized per repeat.
ScalingReport scaling_exponents(const ReturnPanel& binary, const ScalingConfig& cfg);

struct SubsetScanEntry {
  std::size_t total = 0;
  Matrix couplings;  // restricted to the fixed subset
  std::vector<std::pair<std::size_t, std::size_t>> largest;   // 10 pairs, subset-local indices
  std::vector<std::pair<std::size_t, std::size_t>> smallest;  // 10 pairs
  double mean = 0.0;
  double std = 0.0;
  double mean_abs = 0.0;
};

struct SubsetScanResult {
  std::vector<std::size_t> subset;  // panel rows of the fixed subset
  std::vector<SubsetScanEntry> entries;
};

struct SubsetScanConfig {
  std::size_t window_last = 0;
  std::size_t window_size = 250;
  std::size_t subset_size = 20;
  std::vector<std::size_t> totals;
  InferenceConfig inference;
  std::uint64_t seed = 1;
  std::size_t extremes = 10;
};

/// Infers on growing ticker sets that all contain one fixed random subset and
/// tracks the couplings restricted to that subset.
SubsetScanResult subset_coupling_scan(const ReturnPanel& binary, const SubsetScanConfig& cfg);

/// Inference on a window of a subset of rows (in the given order).
InferenceResult infer_rows(const ReturnPanel& panel, const std::vector<std::size_t>& rows, std::size_t window_last,
                           std::size_t window_size, const InferenceConfig& cfg);

}  // namespace im
