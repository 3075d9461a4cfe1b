#include "isingmarket/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "csv_util.hpp"

namespace im {

namespace {

bool is_integer(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// ISO dates compare lexicographically; plain day indices compare numerically.
bool date_less(const std::string& a, const std::string& b) {
  if (is_integer(a) && is_integer(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

std::string to_string(ReturnKind kind) {
  switch (kind) {
    case ReturnKind::Raw: return "raw";
    case ReturnKind::Standardized: return "standardized";
    case ReturnKind::Binary: return "binary";
  }
  return "raw";
}

ReturnKind parse_return_kind(const std::string& text) {
  if (text == "raw") return ReturnKind::Raw;
  if (text == "standardized" || text == "std") return ReturnKind::Standardized;
  if (text == "binary" || text == "bin") return ReturnKind::Binary;
  throw ConfigError("unknown return kind '" + text + "' (expected raw|standardized|binary)");
}

void PricePanel::validate() const {
  if (tickers.size() != series()) throw ConfigError("price panel: ticker count does not match rows");
  if (dates.size() != length()) throw ConfigError("price panel: date count does not match columns");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!date_less(dates[t - 1], dates[t]))
      throw ConfigError("price panel: dates not strictly increasing at '" + dates[t] + "'");
  for (Eigen::Index i = 0; i < prices.rows(); ++i)
    for (Eigen::Index t = 0; t < prices.cols(); ++t)
      if (!(prices(i, t) > 0.0) || !std::isfinite(prices(i, t)))
        throw ConfigError("price panel: non-positive price for " + tickers[i] + " on " + dates[t]);
}

void ReturnPanel::validate() const {
  if (tickers.size() != series()) throw ConfigError("return panel: ticker count does not match rows");
  if (dates.size() != length()) throw ConfigError("return panel: date count does not match columns");
  if (!values.allFinite()) throw NumericError("return panel: non-finite entries");
  if (kind == ReturnKind::Binary) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      double v = values.data()[i];
      if (v != 1.0 && v != -1.0) throw ConfigError("binary panel holds a value other than +/-1");
    }
  }
}

PricePanel parse_prices_csv(const std::string& text, IngestReport* report) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("prices CSV is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "date")
    throw ConfigError("prices CSV header must be 'date,TICKER1,...'");
  const std::size_t n = header.size() - 1;

  std::vector<std::string> dates;
  std::vector<std::vector<double>> cols(n);
  std::vector<std::string> reason(n);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.empty()) continue;
    dates.push_back(cells[0]);
    for (std::size_t i = 0; i < n; ++i) {
      double v = std::nan("");
      if (i + 1 < cells.size() && !cells[i + 1].empty()) {
        if (!detail::parse_double(cells[i + 1], v)) v = std::nan("");
      }
      if (reason[i].empty()) {
        if (std::isnan(v))
          reason[i] = "missing or unparsable price on " + dates.back();
        else if (!(v > 0.0) || !std::isfinite(v))
          reason[i] = "non-positive price on " + dates.back();
      }
      cols[i].push_back(v);
    }
  }

  PricePanel panel;
  panel.dates = dates;
  std::vector<std::size_t> keep;
  IngestReport local;
  for (std::size_t i = 0; i < n; ++i) {
    if (reason[i].empty()) {
      keep.push_back(i);
    } else {
      local.rejected_tickers.push_back(header[i + 1]);
      local.rejection_reasons.push_back(reason[i]);
    }
  }
  if (keep.empty()) throw ConfigError("prices CSV: every ticker was rejected");
  panel.prices.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(dates.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    panel.tickers.push_back(header[keep[k] + 1]);
    for (std::size_t t = 0; t < dates.size(); ++t) panel.prices(k, t) = cols[keep[k]][t];
  }
  panel.validate();
  local.rows = dates.size();
  if (panel.length() >= 2) {
    local.zero_returns = count_zero_returns(log_returns(panel));
    local.zero_return_fraction =
        static_cast<double>(local.zero_returns) / static_cast<double>(panel.series() * (panel.length() - 1));
  }
  if (report) *report = std::move(local);
  return panel;
}

PricePanel read_prices_csv(const std::string& path, IngestReport* report) {
  return parse_prices_csv(detail::read_file(path), report);
}

ReturnPanel log_returns(const PricePanel& prices) {
  if (prices.length() < 2) throw ConfigError("log_returns needs at least two prices per series");
  ReturnPanel out;
  out.tickers = prices.tickers;
  out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  const Eigen::Index len = prices.prices.cols() - 1;
  out.values = (prices.prices.rightCols(len).array() / prices.prices.leftCols(len).array()).log().matrix();
  out.kind = ReturnKind::Raw;
  return out;
}

ReturnPanel binarize(const ReturnPanel& raw) {
  ReturnPanel out = raw;
  out.values = raw.values.unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
  out.kind = ReturnKind::Binary;
  return out;
}

std::size_t count_zero_returns(const ReturnPanel& raw) {
  return static_cast<std::size_t>((raw.values.array() == 0.0).count());
}

Matrix standardize_window(const Eigen::Ref<const Matrix>& window, const std::vector<std::string>& tickers,
                          const std::string& window_label) {
  Matrix out(window.rows(), window.cols());
  const double inv_t = 1.0 / static_cast<double>(window.cols());
  for (Eigen::Index i = 0; i < window.rows(); ++i) {
    const double mean = window.row(i).sum() * inv_t;
    const double var = (window.row(i).array() - mean).square().sum() * inv_t;
    if (!(var > 0.0)) {
      std::string name = i < static_cast<Eigen::Index>(tickers.size()) ? tickers[i] : "#" + std::to_string(i);
      throw NumericError("zero variance for series " + name +
                         (window_label.empty() ? "" : " in window ending " + window_label));
    }
    out.row(i) = (window.row(i).array() - mean) / std::sqrt(var);
  }
  return out;
}

std::vector<ReturnPanel> standardize(const ReturnPanel& raw, const WindowSpec& spec) {
  if (raw.kind != ReturnKind::Raw) throw ConfigError("standardize expects raw returns");
  std::vector<ReturnPanel> out;
  for (const auto& w : windows(raw, spec)) {
    ReturnPanel p;
    p.tickers = raw.tickers;
    p.dates.assign(raw.dates.begin() + static_cast<std::ptrdiff_t>(w.first),
                   raw.dates.begin() + static_cast<std::ptrdiff_t>(w.last) + 1);
    p.values = standardize_window(w.view(raw), raw.tickers, w.date);
    p.kind = ReturnKind::Standardized;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<WindowRef> windows(std::size_t length, const WindowSpec& spec, const std::vector<std::string>& dates) {
  if (spec.size < 1) throw ConfigError("window size must be >= 1");
  if (spec.stride < 1) throw ConfigError("window stride must be >= 1");
  if (spec.size > length)
    throw ConfigError("window size " + std::to_string(spec.size) + " exceeds series length " + std::to_string(length));
  std::vector<WindowRef> out;
  for (std::size_t last = spec.size - 1; last < length; last += spec.stride) {
    WindowRef w;
    w.first = last + 1 - spec.size;
    w.last = last;
    w.date = last < dates.size() ? dates[last] : std::to_string(last);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WindowRef> windows(const ReturnPanel& panel, const WindowSpec& spec) {
  return windows(panel.length(), spec, panel.dates);
}

Matrix shuffle_window(const Eigen::Ref<const Matrix>& window, std::uint64_t seed) {
  Matrix out = window;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (Eigen::Index t = out.cols() - 1; t > 0; --t) {
      std::uniform_int_distribution<Eigen::Index> pick(0, t);
      std::swap(out(i, t), out(i, pick(rng)));
    }
  }
  return out;
}

ReturnPanel select_series(const ReturnPanel& panel, const std::vector<std::size_t>& rows) {
  ReturnPanel out;
  out.dates = panel.dates;
  out.kind = panel.kind;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), panel.values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= panel.series()) throw ConfigError("select_series: row index out of range");
    out.tickers.push_back(panel.tickers[rows[k]]);
    out.values.row(static_cast<Eigen::Index>(k)) = panel.values.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

}  // namespace im
