#include "isingmarket/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "isingmarket/descriptive_stats.hpp"
#include "isingmarket/evaluation.hpp"
#include "isingmarket/io.hpp"
#include "json.hpp"

#ifndef ISINGMARKET_VERSION
#define ISINGMARKET_VERSION "0.0.0"
#endif

namespace im {

const char* version() { return ISINGMARKET_VERSION; }

namespace {

using nlohmann::json;
using detail::fmt;

// ---------------------------------------------------------------------------
// value parsing

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects on|off, got '" + v + "'");
}

double parse_num(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!detail::parse_double(v, out) || !std::isfinite(out))
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

std::size_t parse_positive(const std::string& key, const std::string& v) {
  const auto n = parse_size(key, v);
  if (n == 0) throw ConfigError("'" + key + "' must be at least 1");
  return n;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto& s : detail::split_csv_line(v))
    if (!s.empty()) out.push_back(s);
  return out;
}

std::vector<double> parse_nums(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_num(key, s));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(parse_positive(key, s));
  return out;
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += (list.empty() ? "" : "|") + std::string(a);
  }
  throw ConfigError("'" + key + "' expects " + list + ", got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"prices", [](RunConfig& c, auto&, auto& v) { c.prices = v; }},
      {"sectors", [](RunConfig& c, auto&, auto& v) { c.sectors = v; }},
      {"params", [](RunConfig& c, auto&, auto& v) { c.params = v; }},
      {"params-b", [](RunConfig& c, auto&, auto& v) { c.params_b = v; }},
      {"out-dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"transform", [](RunConfig& c, auto&, auto& v) { c.transform = parse_return_kind(v); }},
      {"window", [](RunConfig& c, auto& k, auto& v) { c.window.size = parse_positive(k, v); }},
      {"stride", [](RunConfig& c, auto& k, auto& v) { c.window.stride = parse_positive(k, v); }},
      {"window-date", [](RunConfig& c, auto&, auto& v) { c.window_date = v; }},
      {"method",
       [](RunConfig& c, auto&, auto& v) {
         c.inference.method = parse_method(v);
         c.methods = {c.inference.method};
       }},
      {"methods",
       [](RunConfig& c, auto& k, auto& v) {
         std::vector<Method> ms;
         for (const auto& s : split_list(v)) ms.push_back(parse_method(s));
         if (ms.empty()) throw ConfigError("'" + k + "' needs at least one method");
         c.methods = ms;
         c.inference.method = ms.front();
       }},
      {"diag-trick",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "auto")
           c.inference.diagonal_trick.reset();
         else
           c.inference.diagonal_trick = parse_flag(k, v);
       }},
      {"eta-h", [](RunConfig& c, auto& k, auto& v) { c.inference.eta_h = parse_num(k, v); }},
      {"eta-j", [](RunConfig& c, auto& k, auto& v) { c.inference.eta_J = parse_num(k, v); }},
      {"eta-decay", [](RunConfig& c, auto& k, auto& v) { c.inference.eta_decay = parse_num(k, v); }},
      {"max-iters", [](RunConfig& c, auto& k, auto& v) { c.inference.max_iters = parse_positive(k, v); }},
      {"tol", [](RunConfig& c, auto& k, auto& v) { c.inference.tolerance = parse_num(k, v); }},
      {"ridge", [](RunConfig& c, auto& k, auto& v) { c.inference.ridge = parse_num(k, v); }},
      {"model-moments",
       [](RunConfig& c, auto& k, auto& v) {
         const auto s = one_of(k, v, {"auto", "enumeration", "mc"});
         c.inference.model_moments = s == "auto"          ? ModelMoments::Auto
                                     : s == "enumeration" ? ModelMoments::Enumeration
                                                          : ModelMoments::MonteCarlo;
       }},
      {"enumeration-max",
       [](RunConfig& c, auto& k, auto& v) { c.inference.enumeration_max_series = parse_size(k, v); }},
      {"post-hoc-residual",
       [](RunConfig& c, auto& k, auto& v) { c.inference.post_hoc_residual = parse_flag(k, v); }},
      {"mc-sweeps", [](RunConfig& c, auto& k, auto& v) { c.inference.mc.sweeps = parse_positive(k, v); }},
      {"mc-chains", [](RunConfig& c, auto& k, auto& v) { c.inference.mc.chains = parse_positive(k, v); }},
      {"mc-burnin", [](RunConfig& c, auto& k, auto& v) { c.inference.mc.burnin = parse_size(k, v); }},
      {"mc-thin", [](RunConfig& c, auto& k, auto& v) { c.inference.mc.thin = parse_positive(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_u64(k, v); }},
      {"jobs", [](RunConfig& c, auto& k, auto& v) { c.jobs = parse_positive(k, v); }},
      {"strict", [](RunConfig& c, auto& k, auto& v) { c.strict = parse_flag(k, v); }},
      {"stats", [](RunConfig& c, auto& k, auto& v) { c.stats = parse_flag(k, v); }},
      {"mst", [](RunConfig& c, auto& k, auto& v) { c.mst = parse_flag(k, v); }},
      {"cutoffs", [](RunConfig& c, auto& k, auto& v) { c.cutoffs = parse_flag(k, v); }},
      {"scaling", [](RunConfig& c, auto& k, auto& v) { c.scaling = parse_flag(k, v); }},
      {"energy", [](RunConfig& c, auto& k, auto& v) { c.energy = parse_flag(k, v); }},
      {"third-order", [](RunConfig& c, auto& k, auto& v) { c.third_order = parse_flag(k, v); }},
      {"compare", [](RunConfig& c, auto& k, auto& v) { c.compare = parse_flag(k, v); }},
      {"bootstrap", [](RunConfig& c, auto& k, auto& v) { c.bootstrap = parse_flag(k, v); }},
      {"bootstrap-resamples",
       [](RunConfig& c, auto& k, auto& v) { c.bootstrap_resamples = parse_positive(k, v); }},
      {"bootstrap-level", [](RunConfig& c, auto& k, auto& v) { c.bootstrap_level = parse_num(k, v); }},
      {"eigen-k", [](RunConfig& c, auto& k, auto& v) { c.eigen_k = parse_size(k, v); }},
      {"matrices", [](RunConfig& c, auto& k, auto& v) { c.matrices = one_of(k, v, {"none", "last", "all"}); }},
      {"mst-matrix", [](RunConfig& c, auto& k, auto& v) { c.mst_matrix = one_of(k, v, {"J", "cov", "corr"}); }},
      {"coupling-thresholds", [](RunConfig& c, auto& k, auto& v) { c.coupling_thresholds = parse_nums(k, v); }},
      {"eigen-thresholds", [](RunConfig& c, auto& k, auto& v) { c.eigen_thresholds = parse_nums(k, v); }},
      {"cutoff-direction",
       [](RunConfig& c, auto& k, auto& v) {
         c.cutoff_direction = one_of(k, v, {"both", "discard_above", "discard_below"});
       }},
      {"scaling-sizes", [](RunConfig& c, auto& k, auto& v) { c.scaling_sizes = parse_sizes(k, v); }},
      {"scaling-repeats", [](RunConfig& c, auto& k, auto& v) { c.scaling_repeats = parse_positive(k, v); }},
      {"subset-size", [](RunConfig& c, auto& k, auto& v) { c.subset_size = parse_positive(k, v); }},
      {"subset-totals", [](RunConfig& c, auto& k, auto& v) { c.subset_totals = parse_sizes(k, v); }},
      {"baseline-trials", [](RunConfig& c, auto& k, auto& v) { c.baseline_trials = parse_size(k, v); }},
      {"synth-model",
       [](RunConfig& c, auto& k, auto& v) { c.synth_model = one_of(k, v, {"block", "params", "gbm"}); }},
      {"stocks",
       [](RunConfig& c, auto& k, auto& v) {
         c.block.stocks = parse_positive(k, v);
         c.gbm.stocks = c.block.stocks;
       }},
      {"days",
       [](RunConfig& c, auto& k, auto& v) {
         c.synth.days = parse_positive(k, v);
         c.gbm.days = c.synth.days;
       }},
      {"blocks", [](RunConfig& c, auto& k, auto& v) { c.block.blocks = parse_positive(k, v); }},
      {"within-mean", [](RunConfig& c, auto& k, auto& v) { c.block.within_mean = parse_num(k, v); }},
      {"within-sd", [](RunConfig& c, auto& k, auto& v) { c.block.within_sd = parse_num(k, v); }},
      {"within-density", [](RunConfig& c, auto& k, auto& v) { c.block.within_density = parse_num(k, v); }},
      {"background-mean", [](RunConfig& c, auto& k, auto& v) { c.block.background_mean = parse_num(k, v); }},
      {"background-sd", [](RunConfig& c, auto& k, auto& v) { c.block.background_sd = parse_num(k, v); }},
      {"h-mean", [](RunConfig& c, auto& k, auto& v) { c.block.h_mean = parse_num(k, v); }},
      {"h-sd", [](RunConfig& c, auto& k, auto& v) { c.block.h_sd = parse_num(k, v); }},
      {"epsilon", [](RunConfig& c, auto& k, auto& v) { c.synth.epsilon = parse_num(k, v); }},
      {"synth-thin", [](RunConfig& c, auto& k, auto& v) { c.synth.thin = parse_positive(k, v); }},
      {"synth-burnin", [](RunConfig& c, auto& k, auto& v) { c.synth.burnin = parse_size(k, v); }},
      {"market-vol", [](RunConfig& c, auto& k, auto& v) { c.gbm.market_vol = parse_num(k, v); }},
      {"idio-vol", [](RunConfig& c, auto& k, auto& v) { c.gbm.idio_vol = parse_num(k, v); }},
      {"drift-scale", [](RunConfig& c, auto& k, auto& v) { c.gbm.drift_scale = parse_num(k, v); }},
      {"regime-length", [](RunConfig& c, auto& k, auto& v) { c.gbm.regime_length = parse_positive(k, v); }},
  };
  return table;
}

// ---------------------------------------------------------------------------
// run bookkeeping

enum Stream : std::uint64_t {
  kStreamInfer = 1,
  kStreamSample,
  kStreamBootstrap,
  kStreamBaseline,
  kStreamScaling,
  kStreamSubset,
  kStreamSynthModel,
  kStreamSynthMc,
  kStreamThirdOrder,
};

class Run {
 public:
  Run(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  const RunConfig& cfg() const { return cfg_; }

  std::string path(const std::string& rel) const { return (std::filesystem::path(cfg_.out_dir) / rel).string(); }

  void write(const std::string& rel, const std::string& text) {
    io::write_text(path(rel), text);
    outputs_.push_back(rel);
  }

  std::uint64_t seed(const std::string& name, Stream stream) {
    const auto s = derive_seed(cfg_.seed, stream);
    seeds_[name] = s;
    return s;
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    current_ = name;
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      stages_.push_back({{"name", name}, {"seconds", dt}});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto out = f();
      finish();
      return out;
    }
  }

  void window_diag(json entry) { windows_.push_back(std::move(entry)); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }
  void nonconverged(std::size_t n) { nonconverged_ += n; }
  std::size_t nonconverged() const { return nonconverged_; }

  void finish(const std::string& status) {
    std::error_code ec;
    std::filesystem::remove(path(".partial"), ec);
    io::write_text(path("manifest.json"), manifest(status, nullptr).dump(1) + "\n");
  }

  void fail(const std::string& kind, const std::string& message) noexcept {
    try {
      json failure = {{"stage", current_}, {"kind", kind}, {"message", message}};
      io::write_text(path(".partial"), "stage=" + current_ + "\nkind=" + kind + "\nmessage=" + message + "\n");
      io::write_text(path("manifest.json"), manifest("failed", &failure).dump(1) + "\n");
    } catch (...) {
    }
  }

 private:
  json manifest(const std::string& status, const json* failure) const {
    json m;
    m["command"] = command_;
    m["version"] = version();
    m["status"] = status;
    json config = json::object();
    for (const auto& [k, v] : cfg_.entries()) config[k] = v;
    config["seed"] = std::to_string(cfg_.seed);
    m["config"] = config;
    json seeds = json::object();
    seeds["global"] = cfg_.seed;
    for (const auto& [k, v] : seeds_) seeds[k] = v;
    m["seeds"] = seeds;
    m["stages"] = stages_;
    m["windows"] = windows_;
    m["nonconverged_windows"] = nonconverged_;
    m["outputs"] = outputs_;
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    if (failure) m["failure"] = *failure;
    return m;
  }

  std::string command_;
  const RunConfig& cfg_;
  std::string current_ = "setup";
  json stages_ = json::array();
  json windows_ = json::array();
  json extra_ = json::object();
  std::map<std::string, std::uint64_t> seeds_;
  std::vector<std::string> outputs_;
  std::size_t nonconverged_ = 0;
};

/// Runs f(0..n-1) on up to `jobs` threads. The lowest-index failure is
/// rethrown, so errors are as deterministic as the results.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// shared stages

struct Data {
  PricePanel prices;
  IngestReport report;
  ReturnPanel raw;
  ReturnPanel binary;
};

Data ingest(Run& run) {
  const auto& cfg = run.cfg();
  if (cfg.prices.empty()) throw ConfigError("no prices CSV given (set 'prices')");
  return run.stage("ingest", [&] {
    Data d;
    d.prices = read_prices_csv(cfg.prices, &d.report);
    if (d.prices.length() < 2) throw ConfigError("prices CSV needs at least two dates");
    d.raw = log_returns(d.prices);
    d.binary = binarize(d.raw);
    json rep = {{"series", d.prices.series()},
                {"rows", d.report.rows},
                {"rejected", d.report.rejected_tickers},
                {"rejection_reasons", d.report.rejection_reasons},
                {"zero_returns", d.report.zero_returns},
                {"zero_return_fraction", d.report.zero_return_fraction}};
    run.note("ingest", rep);
    return d;
  });
}

/// Windows to process: all of them, or the one named by `window-date`.
std::vector<WindowRef> selected_windows(const ReturnPanel& panel, const RunConfig& cfg) {
  if (cfg.window.size > panel.length())
    throw ConfigError("window size " + std::to_string(cfg.window.size) + " exceeds the " +
                      std::to_string(panel.length()) + " available returns");
  if (cfg.window_date.empty()) return windows(panel, cfg.window);
  const auto it = std::find(panel.dates.begin(), panel.dates.end(), cfg.window_date);
  if (it == panel.dates.end()) throw ConfigError("window-date '" + cfg.window_date + "' is not a return date");
  const auto last = static_cast<std::size_t>(it - panel.dates.begin());
  if (last + 1 < cfg.window.size)
    throw ConfigError("window-date '" + cfg.window_date + "' leaves fewer than " +
                      std::to_string(cfg.window.size) + " days");
  return {WindowRef{last + 1 - cfg.window.size, last, cfg.window_date}};
}

/// The window single-window commands use: `window-date` or the latest one.
WindowRef single_window(const ReturnPanel& panel, const RunConfig& cfg) {
  if (cfg.window.size > panel.length())
    throw ConfigError("window size " + std::to_string(cfg.window.size) + " exceeds the " +
                      std::to_string(panel.length()) + " available returns");
  if (!cfg.window_date.empty()) return selected_windows(panel, cfg).front();
  const auto last = panel.length() - 1;
  return WindowRef{last + 1 - cfg.window.size, last, panel.dates[last]};
}

Matrix transformed_window(const Data& d, const WindowRef& w, ReturnKind kind) {
  switch (kind) {
    case ReturnKind::Raw:
      return w.view(d.raw);
    case ReturnKind::Binary:
      return w.view(d.binary);
    case ReturnKind::Standardized:
      return standardize_window(w.view(d.raw), d.raw.tickers, w.date);
  }
  return {};
}

struct Sectors {
  std::vector<int> ids;
  std::vector<std::string> names;  // per ticker
  std::size_t count = 0;
};

std::optional<Sectors> load_sectors(const RunConfig& cfg, const std::vector<std::string>& tickers, bool required) {
  if (cfg.sectors.empty()) {
    if (required) throw ConfigError("no sectors CSV given (set 'sectors')");
    return std::nullopt;
  }
  const SectorMap map = read_sectors_csv(cfg.sectors);
  Sectors s;
  s.ids = map.indices(tickers);
  s.count = map.sectors().size();
  for (const int id : s.ids) s.names.push_back(map.sectors()[static_cast<std::size_t>(id)]);
  return s;
}

InferenceConfig window_inference(const RunConfig& cfg, Method method, std::uint64_t stream_seed, std::size_t window) {
  InferenceConfig ic = cfg.inference;
  ic.method = method;
  ic.mc.seed = derive_seed(stream_seed, window);
  ic.mc.jobs = 1;
  return ic;
}

json diag_json(const std::string& date, const InferenceResult& r, std::uint64_t mc_seed) {
  json j = {{"date", date},
            {"method", to_string(r.method)},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"condition_number", r.diagnostics.condition_number},
            {"tap_fallbacks", r.diagnostics.tap_fallbacks},
            {"tap_limit_pairs", r.diagnostics.tap_limit_pairs},
            {"diverged", r.diagnostics.diverged}};
  j["residual"] = r.residual ? json(*r.residual) : json(nullptr);
  if (r.method == Method::Exact) {
    j["initialization"] = r.diagnostics.initialization;
    j["enumeration"] = r.diagnostics.enumeration_used;
    if (!r.diagnostics.enumeration_used) j["mc_seed"] = mc_seed;
  }
  return j;
}

std::string inference_row(const std::string& date, const InferenceResult& r) {
  std::ostringstream o;
  o << date << ',' << to_string(r.method) << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ','
    << (r.residual ? fmt(*r.residual) : "") << ',' << fmt(r.diagnostics.condition_number) << ','
    << r.diagnostics.tap_fallbacks << ',' << (r.diagnostics.diverged ? 1 : 0) << '\n';
  return o.str();
}

constexpr const char* kInferenceHeader =
    "date,method,converged,iterations,residual,condition_number,tap_fallbacks,diverged\n";

std::string stat_row(const std::string& date, const std::string& series, const std::string& stat, double value,
                     const std::optional<Interval>& ci = std::nullopt) {
  std::ostringstream o;
  o << date << ',' << series << ',' << stat << ',' << fmt(value) << ',';
  if (ci) o << fmt(ci->lower) << ',' << fmt(ci->upper);
  else o << ',';
  o << '\n';
  return o.str();
}

void summary_rows(std::ostringstream& out, const std::string& date, const std::string& series,
                  const MomentSummary& s) {
  for (const auto st : kMoments) {
    const std::optional<Interval>* ci = st == Statistic::Mean   ? &s.mean_ci
                                        : st == Statistic::Std  ? &s.std_ci
                                        : st == Statistic::Skew ? &s.skew_ci
                                                                : &s.kurt_ci;
    out << stat_row(date, series, to_string(st), s.get(st), *ci);
  }
}

MomentSummary summary_of(const std::vector<double>& values, const RunConfig& cfg, std::uint64_t seed) {
  MomentSummary s = summarize(values);
  if (cfg.bootstrap && values.size() >= 2)
    attach_bootstrap(s, values, cfg.bootstrap_resamples, cfg.bootstrap_level, seed);
  return s;
}

constexpr const char* kStatsHeader = "date,series,stat,value,ci_lo,ci_hi\n";

/// Stats rows for one window plus its statistics object.
std::string window_stats_rows(const RunConfig& cfg, const std::vector<std::string>& tickers, const WindowRef& w,
                              const Matrix& values, std::uint64_t boot_seed, WindowStats* keep) {
  WindowStatsOptions opts;
  opts.with_third_order = cfg.third_order;
  opts.tickers = tickers;
  WindowStats st = window_stats(values, opts);
  std::ostringstream out;
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    out << stat_row(w.date, tickers[i], "mean", st.means(e));
    out << stat_row(w.date, tickers[i], "std", st.volatility(e));
    out << stat_row(w.date, tickers[i], "skew", st.skewness(e));
    out << stat_row(w.date, tickers[i], "kurt", st.kurtosis(e));
  }
  const Vector market = values.colwise().mean().transpose();
  summary_rows(out, w.date, "market",
               summary_of(std::vector<double>(market.data(), market.data() + market.size()), cfg,
                          derive_seed(boot_seed, 0)));
  if (tickers.size() >= 2) {
    summary_rows(out, w.date, "cov_offdiag",
                 summary_of(off_diagonal_values(st.covariance), cfg, derive_seed(boot_seed, 1)));
    summary_rows(out, w.date, "corr_offdiag",
                 summary_of(off_diagonal_values(st.correlation), cfg, derive_seed(boot_seed, 2)));
  }
  const auto k = std::min(cfg.eigen_k, tickers.size());
  if (k > 0) {
    const auto top = eigen_top(st, k, SpectrumOf::Correlation);
    for (std::size_t i = 0; i < top.size(); ++i)
      out << stat_row(w.date, "corr_eigen", "lambda" + std::to_string(i + 1), top[i].value);
  }
  if (st.third_order) {
    const auto vals = st.third_order->strict_upper();
    if (!vals.empty()) summary_rows(out, w.date, "third_order", summary_of(vals, cfg, derive_seed(boot_seed, 3)));
  }
  if (keep) *keep = std::move(st);
  return out.str();
}

bool write_matrices_for(const RunConfig& cfg, std::size_t index, std::size_t count) {
  return cfg.matrices == "all" || (cfg.matrices == "last" && index + 1 == count);
}

std::string safe_name(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  return s;
}

// ---------------------------------------------------------------------------
// commands

int cmd_ingest(Run& run) {
  Data d = ingest(run);
  run.stage("write", [&] {
    run.write("prices_clean.csv", io::prices_to_csv(d.prices));
    run.write("returns_raw.csv", io::returns_to_csv(d.raw));
    run.write("returns_binary.csv", io::returns_to_csv(d.binary));
    std::ostringstream rej;
    rej << "ticker,reason\n";
    for (std::size_t i = 0; i < d.report.rejected_tickers.size(); ++i)
      rej << d.report.rejected_tickers[i] << ",\"" << d.report.rejection_reasons[i] << "\"\n";
    run.write("rejected.csv", rej.str());
  });
  return 0;
}

int cmd_synth(Run& run) {
  const auto& cfg = run.cfg();
  run.stage("synth", [&] {
    if (cfg.synth_model == "gbm") {
      GbmSpec g = cfg.gbm;
      g.seed = run.seed("synth.model", kStreamSynthModel);
      run.write("prices.csv", io::prices_to_csv(gbm_prices(g)));
      return;
    }
    PlantedModel model;
    if (cfg.synth_model == "params") {
      if (cfg.params.empty()) throw ConfigError("synth-model=params needs 'params'");
      model.params = io::read_params(cfg.params);
    } else {
      BlockModelSpec b = cfg.block;
      b.seed = run.seed("synth.model", kStreamSynthModel);
      model = block_model(b);
    }
    SyntheticOptions o = cfg.synth;
    o.seed = run.seed("synth.mc", kStreamSynthMc);
    const SyntheticPanel panel = generate_synthetic(model, o);
    run.write("prices.csv", io::prices_to_csv(panel.prices));
    run.write("truth.json", io::params_to_json(panel.truth.params));
    if (!panel.truth.sectors.empty())
      run.write("sectors.csv", io::sectors_csv(panel.prices.tickers, panel.truth.sectors));
  });
  return 0;
}

int cmd_stats(Run& run) {
  const auto& cfg = run.cfg();
  Data d = ingest(run);
  const auto wins = selected_windows(d.raw, cfg);
  const auto boot = cfg.bootstrap ? run.seed("bootstrap", kStreamBootstrap) : 0;
  std::vector<std::string> rows(wins.size());
  std::vector<std::optional<WindowStats>> kept(wins.size());
  run.stage("stats", [&] {
    parallel_for(wins.size(), cfg.jobs, [&](std::size_t i) {
      const Matrix values = transformed_window(d, wins[i], cfg.transform);
      WindowStats st;
      rows[i] = window_stats_rows(cfg, d.raw.tickers, wins[i], values, derive_seed(boot, i), &st);
      if (write_matrices_for(cfg, i, wins.size())) kept[i] = std::move(st);
    });
  });
  run.stage("write", [&] {
    std::string all = kStatsHeader;
    for (const auto& r : rows) all += r;
    run.write("stats.csv", all);
    for (std::size_t i = 0; i < wins.size(); ++i) {
      if (!kept[i]) continue;
      const auto base = "matrices/" + safe_name(wins[i].date);
      run.write(base + "_covariance.json", io::matrix_to_json(kept[i]->covariance, d.raw.tickers));
      run.write(base + "_correlation.json", io::matrix_to_json(kept[i]->correlation, d.raw.tickers));
    }
    // spectrum of the whole-sample market series
    const Matrix& src = cfg.transform == ReturnKind::Binary ? d.binary.values : d.raw.values;
    const Vector market = src.colwise().mean().transpose();
    const auto amp = dft_amplitudes(std::vector<double>(market.data(), market.data() + market.size()));
    std::ostringstream dft;
    dft << "k,amplitude\n";
    for (std::size_t k = 0; k < amp.size(); ++k) dft << k << ',' << fmt(amp[k]) << '\n';
    run.write("dft.csv", dft.str());
  });
  return 0;
}

struct WindowInference {
  std::vector<InferenceResult> results;  // one per method
  std::vector<std::uint64_t> mc_seeds;
};

WindowInference infer_window(const RunConfig& cfg, const Data& d, const WindowRef& w, std::size_t index,
                             std::uint64_t infer_seed, const WindowStats* stats = nullptr) {
  WindowInference out;
  WindowStats local;
  if (!stats) {
    WindowStatsOptions opts;
    opts.tickers = d.binary.tickers;
    local = window_stats(w.view(d.binary), opts);
    stats = &local;
  }
  const auto targets = MomentTargets::from(*stats, d.binary.tickers);
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    const auto ic = window_inference(cfg, cfg.methods[m], derive_seed(infer_seed, m), index);
    out.results.push_back(infer(targets, ic));
    out.mc_seeds.push_back(ic.mc.seed);
  }
  return out;
}

void record_inference(Run& run, const std::vector<WindowRef>& wins, const std::vector<WindowInference>& res,
                      bool write_params) {
  std::string csv = kInferenceHeader;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < wins.size(); ++i)
    for (std::size_t m = 0; m < res[i].results.size(); ++m) {
      const auto& r = res[i].results[m];
      csv += inference_row(wins[i].date, r);
      run.window_diag(diag_json(wins[i].date, r, res[i].mc_seeds[m]));
      if (!r.converged) ++bad;
      if (write_params)
        run.write("params/" + to_string(r.method) + "/" + safe_name(wins[i].date) + ".json",
                  io::params_to_json(r.params));
    }
  run.write("inference.csv", csv);
  run.nonconverged(bad);
}

int cmd_infer(Run& run) {
  const auto& cfg = run.cfg();
  Data d = ingest(run);
  const auto wins = selected_windows(d.binary, cfg);
  const auto seed = run.seed("inference", kStreamInfer);
  std::vector<WindowInference> res(wins.size());
  run.stage("infer", [&] {
    parallel_for(wins.size(), cfg.jobs, [&](std::size_t i) { res[i] = infer_window(cfg, d, wins[i], i, seed); });
  });
  run.stage("write", [&] { record_inference(run, wins, res, true); });
  return 0;
}

int cmd_sample(Run& run) {
  const auto& cfg = run.cfg();
  if (cfg.params.empty()) throw ConfigError("sample needs 'params'");
  const IsingParams p = run.stage("load", [&] { return io::read_params(cfg.params); });
  McSettings mc = cfg.inference.mc;
  mc.seed = run.seed("sample.mc", kStreamSample);
  mc.jobs = cfg.jobs;
  mc.third_order = cfg.third_order;
  const SampleStats s = run.stage("sample", [&] { return metropolis_sample(p, mc); });
  run.stage("write", [&] {
    std::ostringstream means;
    means << "ticker,mean,se\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      means << p.tickers[i] << ',' << fmt(s.means(e)) << ',' << fmt(s.means_se(e)) << '\n';
    }
    run.write("sample_means.csv", means.str());
    run.write("sample_pairs.csv", io::matrix_to_csv(s.pair_moments, p.tickers));
    run.write("sample_pairs_se.csv", io::matrix_to_csv(s.pair_se, p.tickers));
    if (s.third_order) {
      std::ostringstream t;
      t << "i,j,k,value\n";
      const auto n = p.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          for (std::size_t k = j + 1; k < n; ++k)
            t << p.tickers[i] << ',' << p.tickers[j] << ',' << p.tickers[k] << ',' << fmt((*s.third_order)(i, j, k))
              << '\n';
      run.write("sample_third_order.csv", t.str());
    }
    run.note("sample", {{"recorded", s.sample_count}});
  });
  return 0;
}

/// Weight matrix for tree analyses: a params file, or the selected window.
struct Weights {
  Matrix matrix;
  std::vector<std::string> tickers;
  std::string source;
};

Weights load_weights(Run& run, bool allow_data_matrix) {
  const auto& cfg = run.cfg();
  if (cfg.mst_matrix == "J" && !cfg.params.empty()) {
    auto p = run.stage("load", [&] { return io::read_params(cfg.params); });
    return {p.J, p.tickers, "params:" + cfg.params};
  }
  Data d = ingest(run);
  const auto w = single_window(d.binary, cfg);
  if (cfg.mst_matrix == "J" || !allow_data_matrix) {
    const auto seed = run.seed("inference", kStreamInfer);
    auto res = run.stage("infer", [&] { return infer_window(cfg, d, w, 0, seed); });
    record_inference(run, {w}, {res}, true);
    return {res.results.front().params.J, d.binary.tickers, to_string(cfg.methods.front()) + ":" + w.date};
  }
  const Matrix values = transformed_window(d, w, cfg.transform);
  WindowStatsOptions opts;
  opts.tickers = d.raw.tickers;
  const WindowStats st = run.stage("stats", [&] { return window_stats(values, opts); });
  Matrix m = cfg.mst_matrix == "cov" ? st.covariance : st.correlation;
  m.diagonal().setZero();
  return {m, d.raw.tickers, cfg.mst_matrix + ":" + w.date};
}

json mst_json(const MstResult& r, const Sectors& s, const std::optional<SectorBaseline>& base) {
  json j = {{"q_mst", r.q}, {"components", r.components}, {"disconnected", r.disconnected}};
  json sectors = json::array();
  std::vector<std::string> names(s.count);
  for (std::size_t i = 0; i < s.ids.size(); ++i) names[static_cast<std::size_t>(s.ids[i])] = s.names[i];
  for (std::size_t k = 0; k < s.count; ++k) {
    const auto size = static_cast<std::size_t>(std::count(s.ids.begin(), s.ids.end(), static_cast<int>(k)));
    if (size == 0) continue;
    sectors.push_back({{"sector", names[k]}, {"size", size}, {"max_cluster", r.max_cluster[k]}, {"clusters", r.clusters[k]}});
  }
  j["sectors"] = sectors;
  if (base)
    j["baseline"] = {{"mean", base->mean}, {"std", base->std}, {"lower", base->lower},
                     {"upper", base->upper}, {"trials", base->trials}};
  return j;
}

int cmd_mst(Run& run) {
  const auto& cfg = run.cfg();
  const Weights w = load_weights(run, true);
  const auto sec = *load_sectors(cfg, w.tickers, true);
  const MstResult r = run.stage("mst", [&] { return analyze_mst(w.matrix, sec.ids, sec.count); });
  std::optional<SectorBaseline> base;
  if (cfg.baseline_trials > 0) {
    const auto seed = run.seed("baseline", kStreamBaseline);
    base = run.stage("baseline",
                     [&] { return random_sector_baseline(r.edges, sec.ids, sec.count, cfg.baseline_trials, seed); });
  }
  run.stage("write", [&] {
    run.write("mst_edges.csv", io::mst_edges_csv(r.edges, w.tickers, sec.names));
    run.write("mst.dot", io::mst_dot(r.edges, w.tickers, sec.names));
    json j = mst_json(r, sec, base);
    j["source"] = w.source;
    run.write("mst.json", j.dump(1) + "\n");
  });
  return 0;
}

std::vector<CutoffDirection> directions(const RunConfig& cfg) {
  if (cfg.cutoff_direction == "both") return {CutoffDirection::DiscardAbove, CutoffDirection::DiscardBelow};
  return {parse_cutoff_direction(cfg.cutoff_direction)};
}

std::string scan_csv(const std::vector<CutoffPoint>& pts) {
  std::ostringstream o;
  o << "threshold,q_mst,disconnected,kept\n";
  for (const auto& p : pts) o << fmt(p.threshold) << ',' << fmt(p.q) << ',' << (p.disconnected ? 1 : 0) << ',' << p.kept << '\n';
  return o.str();
}

void cutoff_stage(Run& run, const Matrix& J, const Sectors& sec, const std::string& prefix) {
  const auto& cfg = run.cfg();
  run.stage("cutoff", [&] {
    std::vector<double> ct = cfg.coupling_thresholds;
    if (ct.empty()) {
      const auto vals = upper_triangle(J);
      for (int q = 0; q <= 20; ++q) ct.push_back(quantile(vals, q / 20.0));
    }
    std::sort(ct.begin(), ct.end());
    ct.erase(std::unique(ct.begin(), ct.end()), ct.end());
    Eigen::SelfAdjointEigenSolver<Matrix> es(J, Eigen::EigenvaluesOnly);
    const Vector ev = es.eigenvalues();  // ascending
    for (const auto dir : directions(cfg)) {
      // default grid: between consecutive eigenvalues, plus the point keeping every mode
      std::vector<double> et = cfg.eigen_thresholds;
      if (et.empty()) {
        if (dir == CutoffDirection::DiscardBelow) et.push_back(ev(0) - 1.0);
        for (Eigen::Index i = 0; i + 1 < ev.size(); ++i) et.push_back(0.5 * (ev(i) + ev(i + 1)));
        if (dir == CutoffDirection::DiscardAbove) et.push_back(ev(ev.size() - 1) + 1.0);
      }
      std::sort(et.begin(), et.end());
      et.erase(std::unique(et.begin(), et.end()), et.end());
      const auto tag = to_string(dir);
      run.write(prefix + "cutoff_coupling_" + tag + ".csv",
                scan_csv(coupling_cutoff_scan(J, sec.ids, sec.count, ct, dir)));
      run.write(prefix + "cutoff_eigen_" + tag + ".csv", scan_csv(eigen_cutoff_scan(J, sec.ids, sec.count, et, dir)));
    }
  });
}

int cmd_cutoff(Run& run) {
  const auto& cfg = run.cfg();
  const Weights w = load_weights(run, false);
  const auto sec = *load_sectors(cfg, w.tickers, true);
  cutoff_stage(run, w.matrix, sec, "");
  return 0;
}

std::vector<std::size_t> default_sizes(std::size_t n) {
  std::vector<std::size_t> out;
  for (const double f : {0.25, 0.4, 0.55, 0.7, 0.85, 1.0}) {
    const auto s = static_cast<std::size_t>(std::lround(f * static_cast<double>(n)));
    if (s >= 3 && (out.empty() || out.back() != s)) out.push_back(s);
  }
  return out;
}

void scaling_stage(Run& run, const Data& d, const WindowRef& w, const std::string& prefix) {
  const auto& cfg = run.cfg();
  ScalingConfig sc;
  sc.window_last = w.last;
  sc.window_size = w.size();
  sc.sizes = cfg.scaling_sizes.empty() ? default_sizes(d.binary.series()) : cfg.scaling_sizes;
  sc.repeats = cfg.scaling_repeats;
  sc.inference = cfg.inference;
  sc.inference.method = cfg.methods.front();
  sc.inference.mc.jobs = 1;
  sc.seed = run.seed("scaling", kStreamScaling);
  const ScalingReport rep = run.stage("scaling", [&] { return scaling_exponents(d.binary, sc); });
  run.stage("write", [&] {
    std::ostringstream alpha, moments, summary;
    alpha << "size,repeat,moment,alpha\n";
    moments << "size,repeat,moment,value\n";
    summary << "moment,alpha,alpha_sd,alpha_se,fit_se,valid,excluded\n";
    for (const auto* group : {&rep.fields, &rep.couplings}) {
      const std::string pfx = group == &rep.fields ? "h_" : "J_";
      for (const auto& ms : *group) {
        const auto name = pfx + to_string(ms.moment);
        for (std::size_t r = 0; r < ms.per_repeat.size(); ++r)
          alpha << "all," << r << ',' << name << ',' << fmt(ms.per_repeat[r]) << '\n';
        for (std::size_t s = 0; s < ms.values.size(); ++s)
          for (std::size_t r = 0; r < ms.values[s].size(); ++r)
            moments << rep.sizes[s] << ',' << r << ',' << name << ',' << fmt(ms.values[s][r]) << '\n';
        summary << name << ',' << fmt(ms.alpha) << ',' << fmt(ms.alpha_sd) << ',' << fmt(ms.alpha_se) << ','
                << fmt(ms.fit_se) << ',' << ms.valid << ',' << ms.excluded << '\n';
      }
    }
    run.write(prefix + "scaling.csv", alpha.str());
    run.write(prefix + "scaling_moments.csv", moments.str());
    run.write(prefix + "scaling_summary.csv", summary.str());
  });
}

int cmd_scaling(Run& run) {
  Data d = ingest(run);
  scaling_stage(run, d, single_window(d.binary, run.cfg()), "");
  return 0;
}

int cmd_subset_scan(Run& run) {
  const auto& cfg = run.cfg();
  Data d = ingest(run);
  const auto w = single_window(d.binary, cfg);
  const auto n = d.binary.series();
  SubsetScanConfig sc;
  sc.window_last = w.last;
  sc.window_size = w.size();
  sc.subset_size = cfg.subset_size;
  sc.totals = cfg.subset_totals;
  if (sc.totals.empty()) {
    for (std::size_t t = cfg.subset_size; t < n; t += 10) sc.totals.push_back(t);
    sc.totals.push_back(n);
  }
  sc.inference = cfg.inference;
  sc.inference.method = cfg.methods.front();
  sc.inference.mc.jobs = 1;
  sc.seed = run.seed("subset", kStreamSubset);
  const SubsetScanResult res = run.stage("subset-scan", [&] { return subset_coupling_scan(d.binary, sc); });
  run.stage("write", [&] {
    std::vector<std::string> names;
    for (const auto r : res.subset) names.push_back(d.binary.tickers[r]);
    std::ostringstream csv;
    csv << "total,mean,std,mean_abs\n";
    json entries = json::array();
    auto pairs = [&](const std::vector<std::pair<std::size_t, std::size_t>>& ps, const Matrix& J) {
      json a = json::array();
      for (const auto& [i, j] : ps)
        a.push_back({{"i", names[i]}, {"j", names[j]},
                     {"J", J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))}});
      return a;
    };
    for (const auto& e : res.entries) {
      csv << e.total << ',' << fmt(e.mean) << ',' << fmt(e.std) << ',' << fmt(e.mean_abs) << '\n';
      json m = json::array();
      for (Eigen::Index i = 0; i < e.couplings.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(e.couplings.cols()));
        for (Eigen::Index j = 0; j < e.couplings.cols(); ++j) row[static_cast<std::size_t>(j)] = e.couplings(i, j);
        m.push_back(row);
      }
      entries.push_back({{"total", e.total},
                         {"largest", pairs(e.largest, e.couplings)},
                         {"smallest", pairs(e.smallest, e.couplings)},
                         {"couplings", m}});
    }
    run.write("subset_scan.csv", csv.str());
    run.write("subset_scan.json", json({{"window", w.date}, {"subset", names}, {"entries", entries}}).dump(1) + "\n");
  });
  return 0;
}

constexpr const char* kEnergyHeader =
    "date,method,e_ext,e_int,energy_ratio,bias_ratio,bias_ratio_abs,bias_ratio_sign,mean_h_ext,mean_h_int\n";

std::string energy_row(const std::string& date, Method m, const EnergySplit& e) {
  std::ostringstream o;
  o << date << ',' << to_string(m) << ',' << fmt(e.e_ext) << ',' << fmt(e.e_int) << ',' << fmt(e.energy_ratio) << ','
    << fmt(e.bias_ratio) << ',' << fmt(e.bias_ratio_abs) << ',' << e.bias_ratio_sign << ',' << fmt(e.h_ext.mean())
    << ',' << fmt(e.h_int.mean()) << '\n';
  return o.str();
}

int cmd_energy(Run& run) {
  const auto& cfg = run.cfg();
  Data d = ingest(run);
  const auto wins = selected_windows(d.binary, cfg);
  const auto seed = run.seed("inference", kStreamInfer);
  std::vector<WindowInference> res(wins.size());
  std::vector<std::string> rows(wins.size());
  run.stage("energy", [&] {
    parallel_for(wins.size(), cfg.jobs, [&](std::size_t i) {
      WindowStatsOptions opts;
      opts.tickers = d.binary.tickers;
      const WindowStats st = window_stats(wins[i].view(d.binary), opts);
      res[i] = infer_window(cfg, d, wins[i], i, seed, &st);
      for (const auto& r : res[i].results) rows[i] += energy_row(wins[i].date, r.method, energy_split(r.params, st.means));
    });
  });
  run.stage("write", [&] {
    record_inference(run, wins, res, false);
    std::string csv = kEnergyHeader;
    for (const auto& r : rows) csv += r;
    run.write("energy.csv", csv);
  });
  return 0;
}

constexpr const char* kCompareHeader = "date,method,reference,target,nrmse,pearson\n";

std::string compare_rows(const std::string& date, const std::vector<InferenceResult>& rs) {
  std::string out;
  if (rs.size() < 2) return out;
  const auto& ref = rs.front();
  for (std::size_t m = 1; m < rs.size(); ++m) {
    const auto c = compare_methods(rs[m].params, ref.params);
    for (const auto& [target, rep] : {std::pair{"h", c.h}, std::pair{"J", c.J}})
      out += date + ',' + to_string(rs[m].method) + ',' + to_string(ref.method) + ',' + target + ',' + fmt(rep.nrmse) +
             ',' + fmt(rep.pearson) + '\n';
  }
  return out;
}

int cmd_compare(Run& run) {
  const auto& cfg = run.cfg();
  if (!cfg.params.empty() && !cfg.params_b.empty()) {
    const auto a = io::read_params(cfg.params);
    const auto b = io::read_params(cfg.params_b);
    if (a.size() != b.size()) throw ConfigError("compare: parameter sets differ in size");
    const auto c = run.stage("compare", [&] { return compare_methods(a, b); });
    run.write("compare.csv", "target,nrmse,pearson\nh," + fmt(c.h.nrmse) + ',' + fmt(c.h.pearson) + "\nJ," +
                                 fmt(c.J.nrmse) + ',' + fmt(c.J.pearson) + '\n');
    return 0;
  }
  if (cfg.methods.size() < 2) throw ConfigError("compare needs two params files or at least two 'methods'");
  Data d = ingest(run);
  const auto wins = selected_windows(d.binary, cfg);
  const auto seed = run.seed("inference", kStreamInfer);
  std::vector<WindowInference> res(wins.size());
  std::vector<std::string> rows(wins.size());
  run.stage("compare", [&] {
    parallel_for(wins.size(), cfg.jobs, [&](std::size_t i) {
      res[i] = infer_window(cfg, d, wins[i], i, seed);
      rows[i] = compare_rows(wins[i].date, res[i].results);
    });
  });
  run.stage("write", [&] {
    record_inference(run, wins, res, false);
    std::string csv = kCompareHeader;
    for (const auto& r : rows) csv += r;
    run.write("compare.csv", csv);
  });
  return 0;
}

int cmd_run(Run& run) {
  const auto& cfg = run.cfg();
  Data d = ingest(run);
  const auto wins = selected_windows(d.binary, cfg);
  const auto sec = load_sectors(cfg, d.binary.tickers, false);
  const auto infer_seed = run.seed("inference", kStreamInfer);
  const auto boot = cfg.bootstrap ? run.seed("bootstrap", kStreamBootstrap) : 0;

  struct Out {
    std::string stats, energy, mst, compare;
    WindowInference inf;
    std::optional<WindowStats> kept;
    std::optional<MstResult> tree;
  };
  std::vector<Out> out(wins.size());
  run.stage("windows", [&] {
    parallel_for(wins.size(), cfg.jobs, [&](std::size_t i) {
      const auto& w = wins[i];
      Out& o = out[i];
      const bool keep = write_matrices_for(cfg, i, wins.size());
      if (cfg.stats) {
        WindowStats st;
        o.stats = window_stats_rows(cfg, d.raw.tickers, w, transformed_window(d, w, cfg.transform),
                                    derive_seed(boot, i), &st);
        if (keep) o.kept = std::move(st);
      }
      WindowStatsOptions opts;
      opts.tickers = d.binary.tickers;
      const WindowStats bst = window_stats(w.view(d.binary), opts);
      o.inf = infer_window(cfg, d, w, i, infer_seed, &bst);
      const auto& first = o.inf.results.front();
      if (cfg.energy) o.energy = energy_row(w.date, first.method, energy_split(first.params, bst.means));
      if (cfg.mst && sec) {
        auto r = analyze_mst(first.params.J, sec->ids, sec->count);
        o.mst = w.date + ',' + to_string(first.method) + ',' + fmt(r.q) + ',' + std::to_string(r.components) + '\n';
        if (keep) o.tree = std::move(r);
      }
      if (cfg.compare) o.compare = compare_rows(w.date, o.inf.results);
    });
  });

  run.stage("write", [&] {
    std::vector<WindowInference> infs;
    for (auto& o : out) infs.push_back(o.inf);
    record_inference(run, wins, infs, true);
    auto join = [&](const char* header, std::string Out::*field) {
      std::string s = header;
      for (const auto& o : out) s += o.*field;
      return s;
    };
    if (cfg.stats) run.write("stats.csv", join(kStatsHeader, &Out::stats));
    if (cfg.energy) run.write("energy.csv", join(kEnergyHeader, &Out::energy));
    if (cfg.mst && sec) run.write("mst_q.csv", join("date,method,q_mst,components\n", &Out::mst));
    if (cfg.compare && cfg.methods.size() >= 2) run.write("compare.csv", join(kCompareHeader, &Out::compare));
    for (std::size_t i = 0; i < wins.size(); ++i) {
      const auto base = safe_name(wins[i].date);
      if (out[i].kept) {
        run.write("matrices/" + base + "_covariance.json", io::matrix_to_json(out[i].kept->covariance, d.raw.tickers));
        run.write("matrices/" + base + "_correlation.json",
                  io::matrix_to_json(out[i].kept->correlation, d.raw.tickers));
      }
      if (out[i].tree) {
        run.write("mst/" + base + "_edges.csv", io::mst_edges_csv(out[i].tree->edges, d.binary.tickers, sec->names));
        run.write("mst/" + base + ".dot", io::mst_dot(out[i].tree->edges, d.binary.tickers, sec->names));
      }
    }
  });

  const auto& last = wins.back();
  const auto& last_params = out.back().inf.results.front().params;
  if (cfg.cutoffs && sec) cutoff_stage(run, last_params.J, *sec, "");
  if (cfg.scaling) scaling_stage(run, d, last, "");
  if (cfg.third_order) {
    run.stage("third-order", [&] {
      const Tensor3 data = third_order_central(last.view(d.binary));
      McSettings mc = cfg.inference.mc;
      mc.seed = run.seed("third_order.mc", kStreamThirdOrder);
      mc.jobs = cfg.jobs;
      mc.third_order = true;
      const SampleStats model = metropolis_sample(last_params, mc);
      const auto& t = d.binary.tickers;
      std::ostringstream o;
      o << "i,j,k,data,model\n";
      for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = i + 1; j < t.size(); ++j)
          for (std::size_t k = j + 1; k < t.size(); ++k)
            o << t[i] << ',' << t[j] << ',' << t[k] << ',' << fmt(data(i, j, k)) << ','
              << fmt((*model.third_order)(i, j, k)) << '\n';
      run.write("third_order.csv", o.str());
    });
  }
  return 0;
}

const std::map<std::string, int (*)(Run&)>& dispatch() {
  static const std::map<std::string, int (*)(Run&)> table = {
      {"ingest", cmd_ingest}, {"synth", cmd_synth},   {"stats", cmd_stats},   {"infer", cmd_infer},
      {"sample", cmd_sample}, {"mst", cmd_mst},       {"cutoff", cmd_cutoff}, {"scaling", cmd_scaling},
      {"subset-scan", cmd_subset_scan},               {"energy", cmd_energy}, {"compare", cmd_compare},
      {"run", cmd_run},
  };
  return table;
}

const char* kind_name(Error::Kind k) {
  switch (k) {
    case Error::Kind::Config:
      return "config";
    case Error::Kind::Numeric:
      return "numeric";
    case Error::Kind::NonConvergence:
      return "nonconvergence";
    case Error::Kind::Io:
      return "io";
  }
  return "internal";
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown setting '" + key + "'");
  const auto v = detail::trim(value);
  it->second(*this, key, v);
  entries_[key] = v;
}

void RunConfig::parse_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key=value");
    set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::string& path) { parse_text(detail::read_file(path)); }

std::string RunConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? std::string() : it->second;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return out;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> c;
    for (const auto& [name, _] : dispatch()) c.push_back(name);
    return c;
  }();
  return out;
}

int run_command(const std::string& command, const RunConfig& config) {
  const auto it = dispatch().find(command);
  if (it == dispatch().end()) throw ConfigError("unknown command '" + command + "'");
  Run run(command, config);
  try {
    config.inference.validate();
    for (const auto& path : {config.prices, config.sectors, config.params, config.params_b})
      if (!path.empty() && !std::filesystem::exists(path)) throw ConfigError("file not found: '" + path + "'");
    if (config.bootstrap && config.bootstrap_resamples < 100)
      throw ConfigError("bootstrap-resamples must be at least 100");
    const int rc = it->second(run);
    if (config.strict && run.nonconverged() > 0) {
      run.finish("nonconverged");
      return static_cast<int>(Error::Kind::NonConvergence);
    }
    run.finish("ok");
    return rc;
  } catch (const Error& e) {
    run.fail(kind_name(e.kind()), e.what());
    throw;
  } catch (const std::exception& e) {
    run.fail("internal", e.what());
    throw;
  }
}

}  // namespace im
