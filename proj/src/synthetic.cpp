#include "isingmarket/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace im {

std::vector<std::string> synthetic_tickers(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "S%03zu", i + 1);
    out.emplace_back(buf);
  }
  return out;
}

std::vector<std::string> synthetic_dates(std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  sys_days day = sys_days{year{2000} / January / 3};
  while (out.size() < n) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                    static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    day += days{1};
  }
  return out;
}

PlantedModel block_model(const BlockModelSpec& spec) {
  if (spec.stocks < 2) throw ConfigError("block model needs at least two stocks");
  if (spec.blocks < 1 || spec.blocks > spec.stocks) throw ConfigError("block count must lie in [1, stocks]");
  if (spec.within_density < 0.0 || spec.within_density > 1.0) throw ConfigError("within_density must lie in [0, 1]");
  const auto n = static_cast<Eigen::Index>(spec.stocks);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::size_t> block(spec.stocks);
  for (std::size_t i = 0; i < spec.stocks; ++i) block[i] = i * spec.blocks / spec.stocks;

  PlantedModel m;
  m.params.tickers = synthetic_tickers(spec.stocks);
  m.params.h.resize(n);
  m.params.J = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m.params.h(i) = spec.h_mean + spec.h_sd * gauss(rng);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v;
      const bool same = block[static_cast<std::size_t>(i)] == block[static_cast<std::size_t>(j)];
      if (same && unif(rng) < spec.within_density)
        v = spec.within_mean + spec.within_sd * gauss(rng);
      else
        v = spec.background_mean + spec.background_sd * gauss(rng);
      m.params.J(i, j) = m.params.J(j, i) = v;
    }
  for (std::size_t i = 0; i < spec.stocks; ++i) m.sectors.push_back("B" + std::to_string(block[i] + 1));
  return m;
}

SyntheticPanel generate_synthetic(const PlantedModel& model, const SyntheticOptions& opts) {
  if (opts.days < 2) throw ConfigError("synthetic panel needs at least two days");
  if (!(opts.epsilon > 0.0)) throw ConfigError("synthetic epsilon must be positive");
  model.params.validate();
  McSettings mc;
  mc.sweeps = opts.days - 1;
  mc.burnin = opts.burnin;
  mc.chains = opts.chains;
  mc.thin = opts.thin;
  mc.seed = opts.seed;
  mc.keep_samples = true;
  SampleStats s = metropolis_sample(model.params, mc);

  SyntheticPanel out;
  out.truth = model;
  out.spins = s.samples;
  const auto n = static_cast<Eigen::Index>(model.params.size());
  out.prices.tickers = model.params.tickers.empty() ? synthetic_tickers(model.params.size()) : model.params.tickers;
  out.prices.dates = synthetic_dates(opts.days);
  out.prices.prices.resize(n, static_cast<Eigen::Index>(opts.days));
  out.prices.prices.col(0).setConstant(opts.start_price);
  for (Eigen::Index t = 1; t < static_cast<Eigen::Index>(opts.days); ++t)
    out.prices.prices.col(t) = (out.prices.prices.col(t - 1).array() * (opts.epsilon * out.spins.col(t - 1).array()).exp()).matrix();
  return out;
}

PricePanel gbm_prices(const GbmSpec& spec) {
  if (spec.stocks < 1 || spec.days < 2) throw ConfigError("gbm_prices: need stocks >= 1 and days >= 2");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.stocks);
  Vector beta(n), sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    beta(i) = 0.7 + 0.6 * std::abs(gauss(rng)) / 2.0;
    sigma(i) = spec.idio_vol * (0.75 + 0.5 * std::abs(gauss(rng)) / 2.0);
  }
  PricePanel p;
  p.tickers = synthetic_tickers(spec.stocks);
  p.dates = synthetic_dates(spec.days);
  p.prices.resize(n, static_cast<Eigen::Index>(spec.days));
  p.prices.col(0).setConstant(100.0);
  double drift = 0.0;
  for (Eigen::Index t = 1; t < static_cast<Eigen::Index>(spec.days); ++t) {
    if ((t - 1) % static_cast<Eigen::Index>(std::max<std::size_t>(1, spec.regime_length)) == 0)
      drift = spec.drift_scale * gauss(rng);
    const double f = spec.market_vol * gauss(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = drift + beta(i) * f + sigma(i) * gauss(rng);
      p.prices(i, t) = p.prices(i, t - 1) * std::exp(r);
    }
  }
  return p;
}

}  // namespace im
