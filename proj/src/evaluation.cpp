#include "isingmarket/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace im {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw ConfigError(std::string(what) + ": length mismatch");
  if (x.size() < 2) throw ConfigError(std::string(what) + ": need at least two values");
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::vector<std::size_t> draw_rows(std::size_t population, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  return all;
}

}  // namespace

double nrmse(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "nrmse");
  const double ybar = mean_of(y);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - y[i]) * (x[i] - y[i]);
    den += (y[i] - ybar) * (y[i] - ybar);
  }
  if (!(den > 0.0)) throw NumericError("nrmse: reference is constant (zero denominator)");
  return std::sqrt(num / den);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  const double xbar = mean_of(x), ybar = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - xbar) * (y[i] - ybar);
    sxx += (x[i] - xbar) * (x[i] - xbar);
    syy += (y[i] - ybar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericError("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> upper_triangle(const Eigen::Ref<const Matrix>& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

ParamsComparison compare_methods(const IsingParams& a, const IsingParams& b) {
  if (a.size() != b.size()) throw ConfigError("compare_methods: dimension mismatch");
  if (!a.tickers.empty() && !b.tickers.empty() && a.tickers != b.tickers)
    throw ConfigError("compare_methods: ticker order differs");
  std::vector<double> ha(a.h.data(), a.h.data() + a.h.size()), hb(b.h.data(), b.h.data() + b.h.size());
  auto ja = upper_triangle(a.J), jb = upper_triangle(b.J);
  ParamsComparison r;
  r.h = ComparisonReport{nrmse(ha, hb), pearson(ha, hb)};
  r.J = ComparisonReport{nrmse(ja, jb), pearson(ja, jb)};
  return r;
}

PowerLawFit fit_power_law(std::span<const double> sizes, std::span<const double> values) {
  if (sizes.size() != values.size()) throw ConfigError("fit_power_law: length mismatch");
  std::vector<double> distinct(sizes.begin(), sizes.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw ConfigError("fit_power_law: need at least 3 distinct sizes");
  PowerLawFit fit;
  const bool all_pos = std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; });
  const bool all_neg = std::all_of(values.begin(), values.end(), [](double v) { return v < 0.0; });
  if (!all_pos && !all_neg) {
    fit.defined = false;
    fit.alpha = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const std::size_t k = sizes.size();
  std::vector<double> x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(sizes[i] > 0.0)) throw ConfigError("fit_power_law: sizes must be positive");
    x[i] = std::log(sizes[i]);
    y[i] = std::log(std::abs(values[i]));
  }
  const double xb = mean_of(x), yb = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - xb) * (x[i] - xb);
    sxy += (x[i] - xb) * (y[i] - yb);
  }
  fit.alpha = sxy / sxx;
  fit.intercept = yb - fit.alpha * xb;
  double ssr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = y[i] - fit.intercept - fit.alpha * x[i];
    ssr += r * r;
  }
  fit.stderr_alpha = std::sqrt(ssr / static_cast<double>(k - 2) / sxx);
  return fit;
}

std::vector<MomentScaling> fit_scaling(const std::vector<std::size_t>& sizes,
                                       const std::vector<std::vector<std::vector<double>>>& values) {
  if (values.size() != sizes.size()) throw ConfigError("fit_scaling: one value set per size expected");
  const std::size_t repeats = values.empty() ? 0 : values.front().size();
  if (repeats == 0) throw ConfigError("fit_scaling: need at least one repeat");
  for (const auto& v : values)
    if (v.size() != repeats) throw ConfigError("fit_scaling: unequal repeat counts");

  std::vector<std::vector<MomentSummary>> summaries(sizes.size(), std::vector<MomentSummary>(repeats));
  for (std::size_t s = 0; s < sizes.size(); ++s)
    for (std::size_t r = 0; r < repeats; ++r) summaries[s][r] = summarize(values[s][r]);

  std::vector<double> xs(sizes.begin(), sizes.end());
  std::vector<MomentScaling> out;
  for (Statistic st : kMoments) {
    MomentScaling ms;
    ms.moment = st;
    ms.values.assign(sizes.size(), std::vector<double>(repeats));
    std::vector<double> good;
    double fit_se_sum = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      std::vector<double> ys(sizes.size());
      bool ok = true;
      for (std::size_t s = 0; s < sizes.size(); ++s) {
        const auto& sum = summaries[s][r];
        ys[s] = sum.get(st);
        ms.values[s][r] = ys[s];
        if ((st == Statistic::Skew || st == Statistic::Kurt) && !sum.higher_defined) ok = false;
      }
      PowerLawFit f;
      if (ok) f = fit_power_law(xs, ys);
      if (!ok || !f.defined) {
        ++ms.excluded;
        ms.per_repeat.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      ms.per_repeat.push_back(f.alpha);
      good.push_back(f.alpha);
      fit_se_sum += f.stderr_alpha;
    }
    ms.valid = good.size();
    if (!good.empty()) {
      MomentSummary g = summarize(good);
      ms.alpha = g.mean;
      ms.alpha_sd = good.size() > 1 ? g.std * std::sqrt(static_cast<double>(good.size()) / (good.size() - 1.0)) : 0.0;
      ms.alpha_se = ms.alpha_sd / std::sqrt(static_cast<double>(good.size()));
      ms.fit_se = fit_se_sum / static_cast<double>(good.size());
    } else {
      ms.alpha = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(ms));
  }
  return out;
}

InferenceResult infer_rows(const ReturnPanel& panel, const std::vector<std::size_t>& rows, std::size_t window_last,
                           std::size_t window_size, const InferenceConfig& cfg) {
  if (window_size < 2 || window_last + 1 < window_size || window_last >= panel.length())
    throw ConfigError("window does not fit inside the panel");
  const auto first = static_cast<Eigen::Index>(window_last + 1 - window_size);
  Matrix window(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(window_size));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= panel.series()) throw ConfigError("row index out of range");
    window.row(static_cast<Eigen::Index>(k)) =
        panel.values.row(static_cast<Eigen::Index>(rows[k])).segment(first, static_cast<Eigen::Index>(window_size));
    names.push_back(panel.tickers[rows[k]]);
  }
  WindowStatsOptions opts;
  opts.tickers = names;
  WindowStats st = window_stats(window, opts);
  return infer(MomentTargets::from(st, names), cfg);
}

ScalingReport scaling_exponents(const ReturnPanel& binary, const ScalingConfig& cfg) {
  if (binary.kind != ReturnKind::Binary) throw ConfigError("scaling_exponents expects a binary panel");
  if (cfg.repeats < 1) throw ConfigError("scaling_exponents: repeats must be >= 1");
  if (cfg.sizes.empty()) throw ConfigError("scaling_exponents: no sizes");
  for (auto n : cfg.sizes) {
    if (n > binary.series()) throw ConfigError("scaling size " + std::to_string(n) + " exceeds N");
    if (n < 2) throw ConfigError("scaling sizes must be >= 2");
  }

  std::vector<std::vector<std::vector<double>>> hv(cfg.sizes.size()), jv(cfg.sizes.size());
  for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      std::mt19937_64 rng(derive_seed(cfg.seed, s * cfg.repeats + r));
      auto rows = draw_rows(binary.series(), cfg.sizes[s], rng);
      std::sort(rows.begin(), rows.end());
      InferenceConfig ic = cfg.inference;
      ic.mc.seed = derive_seed(cfg.inference.mc.seed, s * cfg.repeats + r);
      InferenceResult res = infer_rows(binary, rows, cfg.window_last, cfg.window_size, ic);
      hv[s].emplace_back(res.params.h.data(), res.params.h.data() + res.params.h.size());
      jv[s].push_back(upper_triangle(res.params.J));
    }
  }
  ScalingReport rep;
  rep.sizes = cfg.sizes;
  rep.repeats = cfg.repeats;
  rep.fields = fit_scaling(cfg.sizes, hv);
  rep.couplings = fit_scaling(cfg.sizes, jv);
  return rep;
}

SubsetScanResult subset_coupling_scan(const ReturnPanel& binary, const SubsetScanConfig& cfg) {
  if (binary.kind != ReturnKind::Binary) throw ConfigError("subset_coupling_scan expects a binary panel");
  if (cfg.totals.empty()) throw ConfigError("subset_coupling_scan: no totals");
  const std::size_t n = binary.series();
  for (auto t : cfg.totals) {
    if (t < cfg.subset_size) throw ConfigError("subset_coupling_scan: every total must be >= the subset size");
    if (t > n) throw ConfigError("subset_coupling_scan: total " + std::to_string(t) + " exceeds N = " + std::to_string(n));
  }
  if (cfg.subset_size < 2) throw ConfigError("subset_coupling_scan: subset size must be >= 2");

  SubsetScanResult out;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  auto perm = draw_rows(n, n, rng);
  out.subset.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.subset_size));
  std::sort(out.subset.begin(), out.subset.end());
  std::vector<std::size_t> rest;
  for (std::size_t r = 0; r < n; ++r)
    if (!std::binary_search(out.subset.begin(), out.subset.end(), r)) rest.push_back(r);
  std::mt19937_64 rng_rest(derive_seed(cfg.seed, 1));
  for (std::size_t i = rest.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(rest[i - 1], rest[pick(rng_rest)]);
  }

  const auto k = static_cast<Eigen::Index>(cfg.subset_size);
  for (auto total : cfg.totals) {
    std::vector<std::size_t> rows = out.subset;
    rows.insert(rows.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(total - cfg.subset_size));
    InferenceResult res = infer_rows(binary, rows, cfg.window_last, cfg.window_size, cfg.inference);
    SubsetScanEntry e;
    e.total = total;
    e.couplings = res.params.J.topLeftCorner(k, k);
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> pairs;
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = i + 1; j < k; ++j)
        pairs.push_back({e.couplings(i, j), {static_cast<std::size_t>(i), static_cast<std::size_t>(j)}});
    std::sort(pairs.begin(), pairs.end());
    const std::size_t m = std::min(cfg.extremes, pairs.size());
    for (std::size_t q = 0; q < m; ++q) {
      e.smallest.push_back(pairs[q].second);
      e.largest.push_back(pairs[pairs.size() - 1 - q].second);
    }
    auto vals = upper_triangle(e.couplings);
    MomentSummary s = summarize(vals);
    e.mean = s.mean;
    e.std = s.std;
    double abs_sum = 0.0;
    for (double v : vals) abs_sum += std::abs(v);
    e.mean_abs = vals.empty() ? 0.0 : abs_sum / static_cast<double>(vals.size());
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace im
