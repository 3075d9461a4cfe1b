#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"
#include "isingmarket/descriptive_stats.hpp"

namespace im {

/// Pairwise maximum-entropy model p(s) = exp(-H(s)) / Z with
///
///   H(s) = -h's - s'Js,
///
/// J symmetric with zero diagonal and inverse temperature fixed at 1. The
/// quadratic form counts every unordered pair twice, so the weight of a pair
/// in the exponent is 2 J_ij s_i s_j. For two spins with h = 0 this gives
/// <s_1 s_2> = tanh(2 J_12). Every inference method returns couplings in this
/// convention.
struct IsingParams {
  std::vector<std::string> tickers;
  Vector h;
  Matrix J;

  static constexpr double beta = 1.0;

  IsingParams() = default;
  IsingParams(Vector fields, Matrix couplings, std::vector<std::string> names = {});

  std::size_t size() const { return static_cast<std::size_t>(h.size()); }
  /// Throws ConfigError unless J is square, symmetric, zero-diagonal and all
  /// entries are finite.
  void validate() const;
};

using Spins = std::vector<std::int8_t>;

double hamiltonian(const IsingParams& params, std::span<const std::int8_t> s);

/// -h'x - x'Jx for a real vector x, e.g. the magnetizations.
double mean_field_energy(const IsingParams& params, const Eigen::Ref<const Vector>& x);

/// Energy change when spin i flips: 2 s_i (h_i + 2 sum_j J_ij s_j).
double flip_delta(const IsingParams& params, std::span<const std::int8_t> s, std::size_t i);

struct McSettings {
  std::size_t sweeps = 50000;  // recorded sweeps, summed over all chains
  std::size_t burnin = 1000;   // per chain
  std::size_t chains = 10;
  std::uint64_t seed = 1;
  std::size_t thin = 1;        // sweeps between recorded configurations
  std::size_t batches_per_chain = 10;
  bool third_order = false;
  bool histogram = false;      // full state histogram, N <= 20 only
  bool keep_samples = false;   // retain recorded configurations
  std::size_t jobs = 1;
};

/// Model moments, either estimated by sampling or computed exactly.
struct SampleStats {
  Vector means;
  Matrix pair_moments;  // <s_i s_j>, unit diagonal
  std::size_t sample_count = 0;
  McSettings settings;
  bool exact = false;

  /// Batch-means standard errors; zero for exact moments.
  Vector means_se;
  Matrix pair_se;

  std::optional<Tensor3> third_order;  // central
  /// Probability (exact) or frequency (sampled) of state index b, where bit i
  /// of b set means s_i = +1.
  std::vector<double> state_distribution;
  /// Recorded configurations as an N x S matrix of +/-1 when keep_samples.
  Matrix samples;

  Matrix covariance() const { return pair_moments - means * means.transpose(); }
};

/// Single-spin-flip Metropolis at random sites, one sweep = N attempts.
/// Chains start from independent random states, share the recorded budget
/// evenly and merge exactly (integer accumulators), so results depend only on
/// the settings, never on `jobs`.
SampleStats metropolis_sample(const IsingParams& params, const McSettings& settings);

/// Exhaustive sum over all 2^N states with an explicit partition function.
constexpr std::size_t kMaxExactSeries = 20;
struct ExactOptions {
  bool third_order = false;
  bool distribution = false;
};
SampleStats exact_moments_small(const IsingParams& params, const ExactOptions& opts = {});

/// log Z by exhaustive enumeration.
double log_partition_small(const IsingParams& params);

/// Central third moments of an N x S matrix of recorded configurations,
/// computed from raw moment sums.
Tensor3 third_order_from_samples(const Eigen::Ref<const Matrix>& samples);

struct EnergySplit {
  Vector h_ext;
  Vector h_int;  // J'<s>
  double e_ext = 0.0;
  double e_int = 0.0;
  double energy_ratio = 0.0;  // e_ext / e_int
  bool energy_ratio_finite = true;
  double bias_ratio = 0.0;  // mean(h_ext) / mean(h_int), signed
  double bias_ratio_abs = 0.0;
  int bias_ratio_sign = 0;
  bool bias_ratio_finite = true;
};

EnergySplit energy_split(const IsingParams& params, const Eigen::Ref<const Vector>& means);

}  // namespace im
