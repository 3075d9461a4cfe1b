#include "isingmarket/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csv_util.hpp"
#include "json.hpp"

namespace im::io {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const json& rows, const char* what) {
  if (!rows.is_array()) throw ConfigError(std::string(what) + " must be an array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto cols = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix m(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(std::string(what) + ": ragged rows");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double v) { return detail::fmt(v); }

std::string params_to_json(const IsingParams& params) {
  json j;
  j["tickers"] = params.tickers;
  j["h"] = std::vector<double>(params.h.data(), params.h.data() + params.h.size());
  j["J"] = matrix_json(params.J);
  return j.dump(1) + "\n";
}

IsingParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params JSON: ") + e.what());
  }
  if (!j.contains("h") || !j.contains("J")) throw ConfigError("params JSON needs 'h' and 'J'");
  IsingParams p;
  try {
    auto h = j.at("h").get<std::vector<double>>();
    p.h = Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
    p.J = matrix_from(j.at("J"), "J");
    if (j.contains("tickers")) p.tickers = j.at("tickers").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params JSON: ") + e.what());
  }
  if (p.tickers.empty())
    for (Eigen::Index i = 0; i < p.h.size(); ++i) p.tickers.push_back("S" + std::to_string(i));
  p.validate();
  return p;
}

void write_params(const std::string& path, const IsingParams& params) { write_text(path, params_to_json(params)); }
IsingParams read_params(const std::string& path) { return params_from_json(read_text(path)); }

std::string matrix_to_json(const Matrix& m, const std::vector<std::string>& tickers) {
  json j;
  j["tickers"] = tickers;
  j["matrix"] = matrix_json(m);
  return j.dump(1) + "\n";
}

Matrix matrix_from_json(const std::string& text, std::vector<std::string>* tickers) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("matrix JSON: ") + e.what());
  }
  if (!j.contains("matrix")) throw ConfigError("matrix JSON needs 'matrix'");
  if (tickers && j.contains("tickers")) *tickers = j.at("tickers").get<std::vector<std::string>>();
  return matrix_from(j.at("matrix"), "matrix");
}

std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& tickers) {
  std::ostringstream out;
  out << "ticker";
  for (const auto& t : tickers) out << ',' << t;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << (i < static_cast<Eigen::Index>(tickers.size()) ? tickers[static_cast<std::size_t>(i)] : std::to_string(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << detail::fmt(m(i, j));
    out << '\n';
  }
  return out.str();
}

namespace {

std::string panel_csv(const Matrix& values, const std::vector<std::string>& tickers,
                      const std::vector<std::string>& dates) {
  std::ostringstream out;
  out << "date";
  for (const auto& t : tickers) out << ',' << t;
  out << '\n';
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    out << dates[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < values.rows(); ++i) out << ',' << detail::fmt(values(i, t));
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string prices_to_csv(const PricePanel& panel) { return panel_csv(panel.prices, panel.tickers, panel.dates); }
std::string returns_to_csv(const ReturnPanel& panel) { return panel_csv(panel.values, panel.tickers, panel.dates); }

std::string mst_edges_csv(const std::vector<Edge>& edges, const std::vector<std::string>& tickers,
                          const std::vector<std::string>& sectors) {
  std::ostringstream out;
  out << "i_ticker,j_ticker,weight,i_sector,j_sector\n";
  for (const auto& e : edges)
    out << tickers.at(e.i) << ',' << tickers.at(e.j) << ',' << detail::fmt(e.weight) << ','
        << (sectors.empty() ? "" : sectors.at(e.i)) << ',' << (sectors.empty() ? "" : sectors.at(e.j)) << '\n';
  return out.str();
}

std::string mst_dot(const std::vector<Edge>& edges, const std::vector<std::string>& tickers,
                    const std::vector<std::string>& sectors) {
  std::ostringstream out;
  out << "graph mst {\n";
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    out << "  " << dot_id(tickers[i]);
    if (!sectors.empty()) out << " [sector=" << dot_id(sectors[i]) << "]";
    out << ";\n";
  }
  for (const auto& e : edges)
    out << "  " << dot_id(tickers.at(e.i)) << " -- " << dot_id(tickers.at(e.j)) << " [weight=" << detail::fmt(e.weight)
        << "];\n";
  out << "}\n";
  return out.str();
}

std::string sectors_csv(const std::vector<std::string>& tickers, const std::vector<std::string>& sectors) {
  std::ostringstream out;
  out << "ticker,name,sector\n";
  for (std::size_t i = 0; i < tickers.size(); ++i) out << tickers[i] << ',' << tickers[i] << ',' << sectors.at(i) << '\n';
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) { return detail::read_file(path); }

}  // namespace im::io
