#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"

namespace im {

/// Daily closing prices, one row per series. Every cell is strictly positive
/// and dates are strictly increasing.
struct PricePanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  Matrix prices;  // N x L

  std::size_t series() const { return static_cast<std::size_t>(prices.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(prices.cols()); }
  void validate() const;
};

enum class ReturnKind { Raw, Standardized, Binary };

std::string to_string(ReturnKind kind);
ReturnKind parse_return_kind(const std::string& text);

struct ReturnPanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  Matrix values;  // N x (L-1)
  ReturnKind kind = ReturnKind::Raw;

  std::size_t series() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(values.cols()); }
  void validate() const;
};

struct WindowSpec {
  std::size_t size = 250;
  std::size_t stride = 1;
};

/// A trailing window [first, last] of columns. Windows are identified by the
/// date of their last column.
struct WindowRef {
  std::size_t first = 0;
  std::size_t last = 0;
  std::string date;

  std::size_t size() const { return last - first + 1; }
  auto view(const ReturnPanel& panel) const {
    return panel.values.middleCols(static_cast<Eigen::Index>(first),
                                   static_cast<Eigen::Index>(size()));
  }
};

/// Summary of what ingest accepted, dropped and saw.
struct IngestReport {
  std::vector<std::string> rejected_tickers;
  std::vector<std::string> rejection_reasons;
  std::size_t rows = 0;
  std::size_t zero_returns = 0;
  double zero_return_fraction = 0.0;
};

/// Parses a `date,TICKER1,TICKER2,...` CSV. Tickers with missing, unparsable
/// or non-positive cells are dropped and listed in the report.
PricePanel read_prices_csv(const std::string& path, IngestReport* report = nullptr);
PricePanel parse_prices_csv(const std::string& text, IngestReport* report = nullptr);

ReturnPanel log_returns(const PricePanel& prices);

/// sign(r) with sign(0) := +1.
ReturnPanel binarize(const ReturnPanel& raw);
std::size_t count_zero_returns(const ReturnPanel& raw);

/// Standardizes one window in place semantics: each row gets mean 0 and
/// population std 1. Throws NumericError naming the row on zero variance.
Matrix standardize_window(const Eigen::Ref<const Matrix>& window,
                          const std::vector<std::string>& tickers = {},
                          const std::string& window_label = {});

/// One standardized panel per window of `spec` (each has `spec.size`
/// columns), using that window's own statistics.
std::vector<ReturnPanel> standardize(const ReturnPanel& raw, const WindowSpec& spec);

std::vector<WindowRef> windows(const ReturnPanel& panel, const WindowSpec& spec);
std::vector<WindowRef> windows(std::size_t length, const WindowSpec& spec,
                               const std::vector<std::string>& dates = {});

/// Independent per-row permutation. Each row keeps its multiset of values.
Matrix shuffle_window(const Eigen::Ref<const Matrix>& window, std::uint64_t seed);

/// Restricts a panel to the listed series, in the given order.
ReturnPanel select_series(const ReturnPanel& panel, const std::vector<std::size_t>& rows);

}  // namespace im
