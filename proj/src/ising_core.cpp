#include "isingmarket/ising_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace im {

IsingParams::IsingParams(Vector fields, Matrix couplings, std::vector<std::string> names)
    : tickers(std::move(names)), h(std::move(fields)), J(std::move(couplings)) {}

void IsingParams::validate() const {
  const auto n = h.size();
  if (J.rows() != n || J.cols() != n) throw ConfigError("IsingParams: J must be N x N with N = len(h)");
  if (!tickers.empty() && static_cast<Eigen::Index>(tickers.size()) != n)
    throw ConfigError("IsingParams: ticker count does not match N");
  if (!h.allFinite() || !J.allFinite()) throw ConfigError("IsingParams: non-finite parameter");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (J(i, i) != 0.0) throw ConfigError("IsingParams: J has a non-zero diagonal entry at " + std::to_string(i));
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (J(i, j) != J(j, i))
        throw ConfigError("IsingParams: J is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
}

namespace {

void check_spins(const IsingParams& p, std::span<const std::int8_t> s) {
  if (s.size() != p.size())
    throw ConfigError("spin vector has length " + std::to_string(s.size()) + ", model has " + std::to_string(p.size()));
  for (auto v : s)
    if (v != 1 && v != -1) throw ConfigError("spin entries must be +1 or -1");
}

// Per-chain accumulators. Integer sums make the merge exact and order free.
struct ChainAccum {
  std::size_t n = 0;
  std::size_t records = 0;
  std::vector<std::int64_t> sum_s;
  std::vector<std::int64_t> sum_ss;  // n*n, upper triangle used
  std::vector<std::int64_t> sum_sss; // n*n*n, i<=j<=k used
  std::vector<std::int64_t> hist;
  std::vector<std::vector<std::int64_t>> batch_s, batch_ss;
  std::vector<std::size_t> batch_count;
  std::vector<std::int8_t> samples;  // records x n
};

void run_chain(const IsingParams& p, const McSettings& cfg, std::size_t chain, std::size_t records, ChainAccum& acc) {
  const std::size_t n = p.size();
  acc.n = n;
  acc.records = records;
  acc.sum_s.assign(n, 0);
  acc.sum_ss.assign(n * n, 0);
  if (cfg.third_order) acc.sum_sss.assign(n * n * n, 0);
  if (cfg.histogram) acc.hist.assign(std::size_t{1} << n, 0);
  const std::size_t nb = std::max<std::size_t>(1, std::min(cfg.batches_per_chain, std::max<std::size_t>(records, 1)));
  acc.batch_s.assign(nb, std::vector<std::int64_t>(n, 0));
  acc.batch_ss.assign(nb, std::vector<std::int64_t>(n * n, 0));
  acc.batch_count.assign(nb, 0);
  if (cfg.keep_samples) acc.samples.reserve(records * n);

  std::mt19937_64 rng(derive_seed(cfg.seed, chain));
  std::uniform_int_distribution<std::size_t> site(0, n - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<std::int8_t> s(n);
  for (auto& v : s) v = coin(rng) ? 1 : -1;
  // field[i] = h_i + 2 sum_j J_ij s_j
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = p.h(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j) f += 2.0 * p.J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * s[j];
    field[i] = f;
  }

  auto sweep = [&]() {
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i = site(rng);
      const double delta = 2.0 * s[i] * field[i];
      if (delta <= 0.0 || unif(rng) < std::exp(-delta)) {
        const double shift = -4.0 * s[i];
        s[i] = static_cast<std::int8_t>(-s[i]);
        const auto col = p.J.col(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < n; ++j) field[j] += shift * col(static_cast<Eigen::Index>(j));
      }
    }
  };

  for (std::size_t b = 0; b < cfg.burnin; ++b) sweep();
  const std::size_t thin = std::max<std::size_t>(1, cfg.thin);
  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t t = 0; t < thin; ++t) sweep();
    const std::size_t batch = r * nb / std::max<std::size_t>(records, 1);
    auto& bs = acc.batch_s[batch];
    auto& bss = acc.batch_ss[batch];
    ++acc.batch_count[batch];
    for (std::size_t i = 0; i < n; ++i) {
      bs[i] += s[i];
      for (std::size_t j = i + 1; j < n; ++j) bss[i * n + j] += s[i] * s[j];
    }
    if (cfg.third_order) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          const int sij = s[i] * s[j];
          for (std::size_t k = j; k < n; ++k) acc.sum_sss[(i * n + j) * n + k] += sij * s[k];
        }
    }
    if (cfg.histogram) {
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (s[i] > 0) idx |= std::size_t{1} << i;
      ++acc.hist[idx];
    }
    if (cfg.keep_samples) acc.samples.insert(acc.samples.end(), s.begin(), s.end());
  }
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      acc.sum_s[i] += acc.batch_s[b][i];
      for (std::size_t j = i + 1; j < n; ++j) acc.sum_ss[i * n + j] += acc.batch_ss[b][i * n + j];
    }
  }
}

// Fills a full raw third-moment tensor from the i<=j<=k sums and returns the
// central version.
Tensor3 central_from_raw(const std::vector<double>& raw_upper, const Vector& m, const Matrix& pair, std::size_t n) {
  Tensor3 out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j), K = static_cast<Eigen::Index>(k);
        const double v = raw_upper[(i * n + j) * n + k] - m(I) * pair(J, K) - m(J) * pair(I, K) - m(K) * pair(I, J) +
                         2.0 * m(I) * m(J) * m(K);
        out(i, j, k) = out(i, k, j) = out(j, i, k) = out(j, k, i) = out(k, i, j) = out(k, j, i) = v;
      }
  return out;
}

}  // namespace

double hamiltonian(const IsingParams& params, std::span<const std::int8_t> s) {
  check_spins(params, s);
  Vector x(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) x(static_cast<Eigen::Index>(i)) = s[i];
  return -params.h.dot(x) - x.dot(params.J * x);
}

double mean_field_energy(const IsingParams& params, const Eigen::Ref<const Vector>& x) {
  if (x.size() != params.h.size()) throw ConfigError("mean_field_energy: dimension mismatch");
  double e = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    e -= params.h(i) * x(i);
    for (Eigen::Index j = 0; j < x.size(); ++j) e -= x(i) * params.J(i, j) * x(j);
  }
  return e;
}

double flip_delta(const IsingParams& params, std::span<const std::int8_t> s, std::size_t i) {
  check_spins(params, s);
  if (i >= s.size()) throw ConfigError("flip_delta: site out of range");
  double f = params.h(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < s.size(); ++j)
    f += 2.0 * params.J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * s[j];
  return 2.0 * s[i] * f;
}

SampleStats metropolis_sample(const IsingParams& params, const McSettings& settings) {
  params.validate();
  const std::size_t n = params.size();
  if (n == 0) throw ConfigError("metropolis_sample: empty model");
  if (settings.sweeps < 1) throw ConfigError("metropolis_sample: sweeps must be >= 1");
  if (settings.chains < 1) throw ConfigError("metropolis_sample: chains must be >= 1");
  if (settings.histogram && n > kMaxExactSeries) throw ConfigError("metropolis_sample: histogram needs N <= 20");

  const std::size_t chains = settings.chains;
  std::vector<std::size_t> records(chains, settings.sweeps / chains);
  for (std::size_t c = 0; c < settings.sweeps % chains; ++c) ++records[c];

  std::vector<ChainAccum> acc(chains);
  const std::size_t jobs = std::max<std::size_t>(1, std::min(settings.jobs, chains));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chains; ++c) run_chain(params, settings, c, records[c], acc[c]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chains; c += jobs) run_chain(params, settings, c, records[c], acc[c]);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<std::int64_t> sum_s(n, 0), sum_ss(n * n, 0), sum_sss, hist;
  if (settings.third_order) sum_sss.assign(n * n * n, 0);
  if (settings.histogram) hist.assign(std::size_t{1} << n, 0);
  std::size_t total = 0;
  for (const auto& a : acc) {
    total += a.records;
    for (std::size_t i = 0; i < n; ++i) sum_s[i] += a.sum_s[i];
    for (std::size_t k = 0; k < n * n; ++k) sum_ss[k] += a.sum_ss[k];
    for (std::size_t k = 0; k < sum_sss.size(); ++k) sum_sss[k] += a.sum_sss[k];
    for (std::size_t k = 0; k < hist.size(); ++k) hist[k] += a.hist[k];
  }

  SampleStats out;
  out.settings = settings;
  out.sample_count = total;
  out.means.resize(static_cast<Eigen::Index>(n));
  out.pair_moments = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < n; ++i) {
    out.means(static_cast<Eigen::Index>(i)) = static_cast<double>(sum_s[i]) * inv;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = static_cast<double>(sum_ss[i * n + j]) * inv;
      out.pair_moments(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out.pair_moments(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }

  // Batch means over every non-empty batch of every chain.
  std::vector<Vector> bm;
  std::vector<Matrix> bp;
  for (const auto& a : acc)
    for (std::size_t b = 0; b < a.batch_count.size(); ++b) {
      if (a.batch_count[b] == 0) continue;
      const double bi = 1.0 / static_cast<double>(a.batch_count[b]);
      Vector m(static_cast<Eigen::Index>(n));
      Matrix pm = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        m(static_cast<Eigen::Index>(i)) = static_cast<double>(a.batch_s[b][i]) * bi;
        for (std::size_t j = i + 1; j < n; ++j)
          pm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pm(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
              static_cast<double>(a.batch_ss[b][i * n + j]) * bi;
      }
      bm.push_back(std::move(m));
      bp.push_back(std::move(pm));
    }
  out.means_se = Vector::Zero(static_cast<Eigen::Index>(n));
  out.pair_se = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (bm.size() >= 2) {
    const double nb = static_cast<double>(bm.size());
    Vector mm = Vector::Zero(static_cast<Eigen::Index>(n));
    Matrix mp = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t b = 0; b < bm.size(); ++b) {
      mm += bm[b];
      mp += bp[b];
    }
    mm /= nb;
    mp /= nb;
    Vector vm = Vector::Zero(static_cast<Eigen::Index>(n));
    Matrix vp = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t b = 0; b < bm.size(); ++b) {
      vm += (bm[b] - mm).cwiseAbs2();
      vp += (bp[b] - mp).cwiseAbs2();
    }
    out.means_se = (vm / (nb * (nb - 1.0))).cwiseSqrt();
    out.pair_se = (vp / (nb * (nb - 1.0))).cwiseSqrt();
  }

  if (settings.third_order) {
    std::vector<double> raw(n * n * n, 0.0);
    for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = static_cast<double>(sum_sss[k]) * inv;
    out.third_order = central_from_raw(raw, out.means, out.pair_moments, n);
  }
  if (settings.histogram) {
    out.state_distribution.resize(hist.size());
    for (std::size_t k = 0; k < hist.size(); ++k) out.state_distribution[k] = static_cast<double>(hist[k]) * inv;
  }
  if (settings.keep_samples) {
    out.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(total));
    Eigen::Index col = 0;
    for (const auto& a : acc)
      for (std::size_t r = 0; r < a.records; ++r, ++col)
        for (std::size_t i = 0; i < n; ++i) out.samples(static_cast<Eigen::Index>(i), col) = a.samples[r * n + i];
  }
  return out;
}

namespace {

// Visits every state in Gray-code order. `visit(s, energy)` is called once per
// state; s starts at all -1.
template <typename Visit>
void enumerate_states(const IsingParams& p, Visit&& visit) {
  const std::size_t n = p.size();
  std::vector<std::int8_t> s(n, -1);
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = p.h(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j) f -= 2.0 * p.J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    field[i] = f;
  }
  double energy = hamiltonian(p, s);
  const std::uint64_t states = std::uint64_t{1} << n;
  visit(s, energy);
  for (std::uint64_t k = 1; k < states; ++k) {
    const auto i = static_cast<std::size_t>(std::countr_zero(k));
    energy += 2.0 * s[i] * field[i];
    const double shift = -4.0 * s[i];
    s[i] = static_cast<std::int8_t>(-s[i]);
    for (std::size_t j = 0; j < n; ++j) field[j] += shift * p.J(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    visit(s, energy);
  }
}

std::size_t state_index(const std::vector<std::int8_t>& s) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > 0) idx |= std::size_t{1} << i;
  return idx;
}

void check_exact_size(const IsingParams& p) {
  p.validate();
  if (p.size() == 0) throw ConfigError("exact enumeration: empty model");
  if (p.size() > kMaxExactSeries)
    throw ConfigError("exact enumeration limited to N <= " + std::to_string(kMaxExactSeries) + " (got " +
                      std::to_string(p.size()) + ")");
}

}  // namespace

double log_partition_small(const IsingParams& params) {
  check_exact_size(params);
  double emin = std::numeric_limits<double>::infinity();
  enumerate_states(params, [&](const std::vector<std::int8_t>&, double e) { emin = std::min(emin, e); });
  double z = 0.0;
  enumerate_states(params, [&](const std::vector<std::int8_t>&, double e) { z += std::exp(-(e - emin)); });
  return std::log(z) - emin;
}

SampleStats exact_moments_small(const IsingParams& params, const ExactOptions& opts) {
  check_exact_size(params);
  const std::size_t n = params.size();
  double emin = std::numeric_limits<double>::infinity();
  enumerate_states(params, [&](const std::vector<std::int8_t>&, double e) { emin = std::min(emin, e); });

  double z = 0.0;
  std::vector<double> sum_s(n, 0.0), sum_ss(n * n, 0.0), sum_sss;
  if (opts.third_order) sum_sss.assign(n * n * n, 0.0);
  std::vector<double> dist;
  if (opts.distribution) dist.assign(std::size_t{1} << n, 0.0);
  enumerate_states(params, [&](const std::vector<std::int8_t>& s, double e) {
    const double w = std::exp(-(e - emin));
    z += w;
    for (std::size_t i = 0; i < n; ++i) {
      const double ws = w * s[i];
      sum_s[i] += ws;
      for (std::size_t j = i + 1; j < n; ++j) sum_ss[i * n + j] += ws * s[j];
    }
    if (opts.third_order)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
          for (std::size_t k = j; k < n; ++k) sum_sss[(i * n + j) * n + k] += w * s[i] * s[j] * s[k];
    if (opts.distribution) dist[state_index(s)] = w;
  });

  SampleStats out;
  out.exact = true;
  out.means.resize(static_cast<Eigen::Index>(n));
  out.pair_moments = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.means(static_cast<Eigen::Index>(i)) = sum_s[i] / z;
    for (std::size_t j = i + 1; j < n; ++j)
      out.pair_moments(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          out.pair_moments(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = sum_ss[i * n + j] / z;
  }
  out.means_se = Vector::Zero(static_cast<Eigen::Index>(n));
  out.pair_se = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (opts.third_order) {
    for (auto& v : sum_sss) v /= z;
    out.third_order = central_from_raw(sum_sss, out.means, out.pair_moments, n);
  }
  if (opts.distribution) {
    for (auto& v : dist) v /= z;
    out.state_distribution = std::move(dist);
  }
  return out;
}

Tensor3 third_order_from_samples(const Eigen::Ref<const Matrix>& samples) {
  const auto n = static_cast<std::size_t>(samples.rows());
  const Eigen::Index count = samples.cols();
  if (count < 1) throw ConfigError("third_order_from_samples: no samples");
  const double inv = 1.0 / static_cast<double>(count);
  Vector m = samples.rowwise().sum() * inv;
  Matrix pair = samples * samples.transpose() * inv;
  std::vector<double> raw(n * n * n, 0.0);
  for (Eigen::Index t = 0; t < count; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double xij = samples(static_cast<Eigen::Index>(i), t) * samples(static_cast<Eigen::Index>(j), t);
        for (std::size_t k = j; k < n; ++k) raw[(i * n + j) * n + k] += xij * samples(static_cast<Eigen::Index>(k), t);
      }
  for (auto& v : raw) v *= inv;
  return central_from_raw(raw, m, pair, n);
}

EnergySplit energy_split(const IsingParams& params, const Eigen::Ref<const Vector>& means) {
  params.validate();
  if (means.size() != params.h.size()) throw ConfigError("energy_split: dimension mismatch");
  if ((means.array().abs() > 1.0).any()) throw ConfigError("energy_split: |means_i| must be <= 1");
  EnergySplit out;
  out.h_ext = params.h;
  out.h_int = params.J.transpose() * means;
  out.e_ext = -out.h_ext.dot(means) + 0.0;
  out.e_int = -out.h_int.dot(means) + 0.0;

  auto ratio = [](double num, double den, bool& finite) {
    if (den == 0.0) {
      finite = false;
      return num == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                        : std::copysign(std::numeric_limits<double>::infinity(), num);
    }
    finite = true;
    return num / den + 0.0;
  };
  out.energy_ratio = ratio(out.e_ext, out.e_int, out.energy_ratio_finite);
  const double mean_ext = out.h_ext.size() ? out.h_ext.mean() : 0.0;
  const double mean_int = out.h_int.size() ? out.h_int.mean() : 0.0;
  out.bias_ratio = ratio(mean_ext, mean_int, out.bias_ratio_finite);
  out.bias_ratio_abs = std::abs(out.bias_ratio);
  out.bias_ratio_sign = std::isnan(out.bias_ratio) ? 0 : (out.bias_ratio > 0.0) - (out.bias_ratio < 0.0);
  return out;
}

}  // namespace im
