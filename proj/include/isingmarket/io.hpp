#pragma once

#include <string>
#include <vector>

#include "isingmarket/common.hpp"
#include "isingmarket/data_ingest.hpp"
#include "isingmarket/ising_core.hpp"
#include "isingmarket/network_analysis.hpp"

namespace im::io {

/// {"tickers": [...], "h": [...], "J": [[...], ...]}
std::string params_to_json(const IsingParams& params);
IsingParams params_from_json(const std::string& text);
void write_params(const std::string& path, const IsingParams& params);
IsingParams read_params(const std::string& path);

/// {"tickers": [...], "matrix": [[...]]}, row-major.
std::string matrix_to_json(const Matrix& m, const std::vector<std::string>& tickers);
Matrix matrix_from_json(const std::string& text, std::vector<std::string>* tickers = nullptr);

/// `ticker,T1,...` header then one labelled row per ticker.
std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& tickers);

/// `date,T1,...` with one row per day, the layout ingest reads.
std::string prices_to_csv(const PricePanel& panel);
std::string returns_to_csv(const ReturnPanel& panel);

std::string mst_edges_csv(const std::vector<Edge>& edges, const std::vector<std::string>& tickers,
                          const std::vector<std::string>& sectors);
std::string mst_dot(const std::vector<Edge>& edges, const std::vector<std::string>& tickers,
                    const std::vector<std::string>& sectors);

std::string sectors_csv(const std::vector<std::string>& tickers, const std::vector<std::string>& sectors);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace im::io
