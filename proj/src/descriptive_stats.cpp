#include "isingmarket/descriptive_stats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <unsupported/Eigen/FFT>

namespace im {

namespace {

void check_symmetric(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(what) + ": matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ConfigError(std::string(what) + ": matrix is not symmetric");
}

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0.0) v = -v;
}

bool is_symmetric_exact(const Eigen::Ref<const Matrix>& m) {
  return m.rows() == m.cols() && m == m.transpose();
}

double statistic_of(const std::vector<double>& v, Statistic s, bool& defined) {
  MomentSummary ms = summarize(v);
  defined = true;
  if ((s == Statistic::Skew || s == Statistic::Kurt) && !ms.higher_defined) defined = false;
  return ms.get(s);
}

}  // namespace

std::vector<double> Tensor3::strict_upper() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      for (std::size_t k = j + 1; k < n_; ++k) out.push_back((*this)(i, j, k));
  return out;
}

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::Mean: return "mean";
    case Statistic::Std: return "std";
    case Statistic::Skew: return "skew";
    case Statistic::Kurt: return "kurt";
  }
  return "mean";
}

double MomentSummary::get(Statistic s) const {
  switch (s) {
    case Statistic::Mean: return mean;
    case Statistic::Std: return std;
    case Statistic::Skew: return skew;
    case Statistic::Kurt: return kurt;
  }
  return mean;
}

Tensor3 third_order_central(const Eigen::Ref<const Matrix>& window) {
  const auto n = static_cast<std::size_t>(window.rows());
  const Eigen::Index len = window.cols();
  Matrix centered = window.colwise() - window.rowwise().mean();
  Tensor3 out(n);
  Vector prod(len);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      prod = centered.row(static_cast<Eigen::Index>(i)).cwiseProduct(centered.row(static_cast<Eigen::Index>(j)));
      for (std::size_t k = j; k < n; ++k) {
        const double v = prod.dot(centered.row(static_cast<Eigen::Index>(k))) / static_cast<double>(len);
        out(i, j, k) = out(i, k, j) = out(j, i, k) = out(j, k, i) = out(k, i, j) = out(k, j, i) = v;
      }
    }
  }
  return out;
}

WindowStats window_stats(const Eigen::Ref<const Matrix>& window, const WindowStatsOptions& opts) {
  const Eigen::Index n = window.rows();
  const Eigen::Index len = window.cols();
  if (len < 2) throw ConfigError("window_stats needs at least two observations per series");
  if (n < 1) throw ConfigError("window_stats needs at least one series");

  WindowStats st;
  st.samples = static_cast<std::size_t>(len);
  const double inv_t = 1.0 / static_cast<double>(len);
  st.means = window.rowwise().sum() * inv_t;
  Matrix centered = window.colwise() - st.means;
  st.covariance = centered * centered.transpose() * inv_t;
  st.covariance = (0.5 * (st.covariance + st.covariance.transpose())).eval();
  if ((window.array().abs() == 1.0).all())
    st.covariance.diagonal() = (1.0 - st.means.array().square()).matrix();
  st.volatility = st.covariance.diagonal().cwiseSqrt();

  st.skewness.resize(n);
  st.kurtosis.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double var = st.covariance(i, i);
    if (!(var > 0.0)) {
      std::string name = i < static_cast<Eigen::Index>(opts.tickers.size()) ? opts.tickers[i] : "#" + std::to_string(i);
      throw NumericError("zero variance for series " + name + "; correlation undefined");
    }
    const double m3 = centered.row(i).array().cube().sum() * inv_t;
    const double m4 = centered.row(i).array().square().square().sum() * inv_t;
    st.skewness(i) = m3 / std::pow(var, 1.5);
    st.kurtosis(i) = m4 / (var * var) - 3.0;
  }

  const Vector inv_sigma = st.volatility.cwiseInverse();
  st.correlation = inv_sigma.asDiagonal() * st.covariance * inv_sigma.asDiagonal();
  st.correlation.diagonal().setOnes();
  st.correlation = st.correlation.cwiseMax(-1.0).cwiseMin(1.0);

  Eigen::SelfAdjointEigenSolver<Matrix> es(st.covariance);
  st.eigenvalues = es.eigenvalues().reverse();
  st.eigenvectors = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < n; ++c) fix_sign(st.eigenvectors.col(c));

  if (opts.with_third_order) {
    if (static_cast<std::size_t>(n) > opts.max_third_order_series)
      throw ConfigError("third-order tensor requested for " + std::to_string(n) + " series; limit is " +
                        std::to_string(opts.max_third_order_series));
    st.third_order = third_order_central(window);
  }
  return st;
}

MomentSummary summarize(std::span<const double> values) {
  MomentSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skew = m3 / std::pow(m2, 1.5);
    s.kurt = m4 / (m2 * m2) - 3.0;
  } else {
    s.higher_defined = false;
  }
  return s;
}

std::vector<double> off_diagonal_values(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() != m.cols()) throw ConfigError("off_diagonal_values: matrix is not square");
  std::vector<double> out;
  const bool sym = is_symmetric_exact(m);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (sym ? j > i : j != i) out.push_back(m(i, j));
  return out;
}

MomentSummary off_diagonal_summary(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() < 2) throw ConfigError("off_diagonal_summary needs N >= 2");
  auto vals = off_diagonal_values(m);
  return summarize(vals);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Interval bootstrap_ci(std::span<const double> values, Statistic statistic, std::size_t resamples, double level,
                      std::uint64_t seed) {
  if (values.empty()) throw ConfigError("bootstrap_ci: empty collection");
  if (resamples < 100) throw ConfigError("bootstrap_ci: need at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap_ci: level must lie in (0, 1)");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> sample(values.size());
  std::vector<double> stats;
  stats.reserve(resamples);
  Interval out;
  out.level = level;
  const std::size_t max_redraws = 100 * resamples;
  while (stats.size() < resamples) {
    for (auto& x : sample) x = values[pick(rng)];
    bool defined = true;
    const double v = statistic_of(sample, statistic, defined);
    if (!defined) {
      if (++out.redrawn > max_redraws)
        throw NumericError("bootstrap_ci: statistic '" + to_string(statistic) +
                           "' undefined on almost every resample (degenerate collection)");
      continue;
    }
    stats.push_back(v);
  }
  const double alpha = 0.5 * (1.0 - level);
  out.lower = quantile(stats, alpha);
  out.upper = quantile(stats, 1.0 - alpha);
  return out;
}

void attach_bootstrap(MomentSummary& summary, std::span<const double> values, std::size_t resamples, double level,
                      std::uint64_t seed) {
  summary.mean_ci = bootstrap_ci(values, Statistic::Mean, resamples, level, derive_seed(seed, 0));
  summary.std_ci = bootstrap_ci(values, Statistic::Std, resamples, level, derive_seed(seed, 1));
  if (summary.higher_defined) {
    summary.skew_ci = bootstrap_ci(values, Statistic::Skew, resamples, level, derive_seed(seed, 2));
    summary.kurt_ci = bootstrap_ci(values, Statistic::Kurt, resamples, level, derive_seed(seed, 3));
  }
}

std::vector<double> dft_amplitudes(std::span<const double> series) {
  if (series.size() < 2) throw ConfigError("dft_amplitudes needs at least two points");
  Eigen::FFT<double> fft;
  std::vector<double> in(series.begin(), series.end());
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, in);
  const std::size_t len = series.size();
  std::vector<double> out(len / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(spectrum[k]) / static_cast<double>(len);
  return out;
}

std::vector<EigenPair> eigen_top(const Eigen::Ref<const Matrix>& symmetric, std::size_t k) {
  check_symmetric(symmetric, "eigen_top");
  if (k > static_cast<std::size_t>(symmetric.rows())) throw ConfigError("eigen_top: k exceeds matrix size");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric);
  const Eigen::Index n = symmetric.rows();
  std::vector<EigenPair> out;
  for (std::size_t r = 0; r < k; ++r) {
    const Eigen::Index c = n - 1 - static_cast<Eigen::Index>(r);
    EigenPair p;
    p.value = es.eigenvalues()(c);
    p.vector = es.eigenvectors().col(c);
    fix_sign(p.vector);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<EigenPair> eigen_top(const WindowStats& stats, std::size_t k, SpectrumOf which) {
  return eigen_top(which == SpectrumOf::Covariance ? stats.covariance : stats.correlation, k);
}

}  // namespace im
