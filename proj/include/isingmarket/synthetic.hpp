#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"
#include "isingmarket/data_ingest.hpp"
#include "isingmarket/ising_core.hpp"

namespace im {

/// Planted sector structure: N stocks split into contiguous blocks. Each pair
/// inside a block is "strong" with probability `within_density` and then
/// draws from N(within_mean, within_sd); every other pair draws from
/// N(background_mean, background_sd). Fields draw from N(h_mean, h_sd).
struct BlockModelSpec {
  std::size_t stocks = 30;
  std::size_t blocks = 3;
  double within_mean = 0.15;
  double within_sd = 0.03;
  double within_density = 1.0;
  double background_mean = 0.0;
  double background_sd = 0.02;
  double h_mean = 0.0;
  double h_sd = 0.05;
  std::uint64_t seed = 1;
};

struct PlantedModel {
  IsingParams params;
  std::vector<std::string> sectors;  // per ticker
};

PlantedModel block_model(const BlockModelSpec& spec);

/// Ticker names S001, S002, ...
std::vector<std::string> synthetic_tickers(std::size_t n);
/// Consecutive weekdays from 2000-01-03, ISO formatted.
std::vector<std::string> synthetic_dates(std::size_t n);

struct SyntheticPanel {
  PricePanel prices;
  Matrix spins;  // N x (days - 1), the planted binary returns
  PlantedModel truth;
};

struct SyntheticOptions {
  std::size_t days = 1000;  // price days; days - 1 spin configurations
  std::size_t burnin = 1000;
  std::size_t thin = 10;   // sweeps between consecutive trading days
  std::size_t chains = 1;
  double epsilon = 0.01;   // |log return| of every synthetic day
  double start_price = 100.0;
  std::uint64_t seed = 1;
};

/// Samples daily configurations from the planted model and turns them into
/// prices S(t+1) = S(t) exp(epsilon s(t)).
SyntheticPanel generate_synthetic(const PlantedModel& model, const SyntheticOptions& opts);

/// One-factor geometric Brownian motion with a slowly switching market drift:
/// r_i(t) = drift(t) + beta_i f(t) + sigma_i e_i(t).
struct GbmSpec {
  std::size_t stocks = 20;
  std::size_t days = 2000;
  double market_vol = 0.01;
  double idio_vol = 0.015;
  double drift_scale = 0.002;
  std::size_t regime_length = 120;  // days per drift regime
  std::uint64_t seed = 1;
};

PricePanel gbm_prices(const GbmSpec& spec);

}  // namespace im
