#include "isingmarket/network_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "csv_util.hpp"
#include "isingmarket/descriptive_stats.hpp"

namespace im {

void SectorMap::add(const std::string& ticker, const std::string& sector, const std::string&) {
  if (ticker.empty() || sector.empty()) throw ConfigError("sector map: empty ticker or sector");
  sector_of_[ticker] = sector;
  if (!sector_index_.count(sector)) {
    sector_index_[sector] = static_cast<int>(sectors_.size());
    sectors_.push_back(sector);
  }
}

const std::string& SectorMap::sector_of(const std::string& ticker) const {
  auto it = sector_of_.find(ticker);
  if (it == sector_of_.end()) throw ConfigError("no sector for ticker '" + ticker + "'");
  return it->second;
}

std::vector<int> SectorMap::indices(const std::vector<std::string>& tickers) const {
  std::vector<int> out;
  out.reserve(tickers.size());
  for (const auto& t : tickers) out.push_back(sector_index_.at(sector_of(t)));
  return out;
}

SectorMap parse_sectors_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("sector CSV is empty");
  auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("sector CSV header lacks '" + name + "' (expected ticker,name,sector)");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ct = col("ticker"), cs = col("sector");
  const auto cn = std::find(header.begin(), header.end(), "name");
  SectorMap map;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() <= std::max(ct, cs)) throw ConfigError("sector CSV: short row '" + line + "'");
    std::string name;
    if (cn != header.end() && static_cast<std::size_t>(cn - header.begin()) < cells.size())
      name = cells[static_cast<std::size_t>(cn - header.begin())];
    map.add(cells[ct], cells[cs], name);
  }
  if (map.sectors().empty()) throw ConfigError("sector CSV has no rows");
  return map;
}

SectorMap read_sectors_csv(const std::string& path) { return parse_sectors_csv(detail::read_file(path)); }

namespace {

constexpr double kAbsent = -std::numeric_limits<double>::infinity();

struct UnionFind {
  std::vector<std::size_t> parent, size;
  explicit UnionFind(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

void check_weights(const Eigen::Ref<const Matrix>& w) {
  if (w.rows() != w.cols()) throw ConfigError("MST: weight matrix is not square");
  if (w.rows() < 2) throw ConfigError("MST: need at least two nodes");
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = i + 1; j < w.cols(); ++j) {
      if (std::isnan(w(i, j))) throw ConfigError("MST: NaN weight");
      if (w(i, j) != w(j, i)) throw ConfigError("MST: weight matrix is not symmetric");
    }
}

// (weight desc, then (lo, hi) asc)
bool better(double wa, std::size_t la, std::size_t ha, double wb, std::size_t lb, std::size_t hb) {
  if (wa != wb) return wa > wb;
  if (la != lb) return la < lb;
  return ha < hb;
}

}  // namespace

SpanningForest build_mst(const Eigen::Ref<const Matrix>& weights) {
  check_weights(weights);
  const auto n = static_cast<std::size_t>(weights.rows());
  std::vector<bool> in_tree(n, false);
  std::vector<double> best_w(n, kAbsent);
  std::vector<std::size_t> best_u(n, n);
  SpanningForest out;
  out.components = 0;

  auto attach = [&](std::size_t u) {
    in_tree[u] = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = weights(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
      if (w == kAbsent) continue;
      const std::size_t lo = std::min(u, v), hi = std::max(u, v);
      if (best_u[v] == n || better(w, lo, hi, best_w[v], std::min(best_u[v], v), std::max(best_u[v], v))) {
        best_w[v] = w;
        best_u[v] = u;
      }
    }
  };

  std::size_t added = 0;
  while (added < n) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v] || best_u[v] == n) continue;
      if (pick == n || better(best_w[v], std::min(best_u[v], v), std::max(best_u[v], v), best_w[pick],
                              std::min(best_u[pick], pick), std::max(best_u[pick], pick)))
        pick = v;
    }
    if (pick == n) {
      // Start a new tree at the smallest outside node.
      std::size_t root = 0;
      while (in_tree[root]) ++root;
      ++out.components;
      attach(root);
      ++added;
      continue;
    }
    const std::size_t u = best_u[pick];
    out.edges.push_back(Edge{std::min(u, pick), std::max(u, pick), best_w[pick]});
    attach(pick);
    ++added;
  }
  return out;
}

double total_weight(const std::vector<Edge>& edges) {
  std::vector<Edge> sorted = edges;
  std::sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  double s = 0.0;
  for (const auto& e : sorted) s += e.weight;
  return s;
}

std::vector<std::vector<std::size_t>> sector_clusters(const std::vector<Edge>& tree, const std::vector<int>& sector_ids,
                                                      std::size_t sector_count) {
  const std::size_t n = sector_ids.size();
  for (int s : sector_ids)
    if (s < 0 || static_cast<std::size_t>(s) >= sector_count) throw ConfigError("sector id out of range");
  UnionFind uf(n);
  for (const auto& e : tree) {
    if (e.i >= n || e.j >= n) throw ConfigError("tree edge references a node outside the sector list");
    if (sector_ids[e.i] == sector_ids[e.j]) uf.unite(e.i, e.j);
  }
  std::vector<std::vector<std::size_t>> out(sector_count);
  for (std::size_t v = 0; v < n; ++v)
    if (uf.find(v) == v) out[static_cast<std::size_t>(sector_ids[v])].push_back(uf.size[v]);
  for (auto& c : out) std::sort(c.rbegin(), c.rend());
  return out;
}

double q_mst(const std::vector<std::vector<std::size_t>>& clusters, std::size_t n) {
  if (n == 0) throw ConfigError("q_mst: N must be positive");
  std::size_t total = 0;
  for (const auto& c : clusters)
    if (!c.empty()) total += *std::max_element(c.begin(), c.end());
  return static_cast<double>(total) / static_cast<double>(n);
}

MstResult analyze_mst(const Eigen::Ref<const Matrix>& weights, const std::vector<int>& sector_ids,
                      std::size_t sector_count) {
  if (sector_ids.size() != static_cast<std::size_t>(weights.rows()))
    throw ConfigError("analyze_mst: sector list length does not match N");
  SpanningForest forest = build_mst(weights);
  MstResult r;
  r.edges = std::move(forest.edges);
  r.components = forest.components;
  r.disconnected = forest.disconnected();
  r.clusters = sector_clusters(r.edges, sector_ids, sector_count);
  for (const auto& c : r.clusters) r.max_cluster.push_back(c.empty() ? 0 : c.front());
  r.q = q_mst(r.clusters, sector_ids.size());
  return r;
}

std::string to_string(CutoffDirection d) {
  return d == CutoffDirection::DiscardAbove ? "discard_above" : "discard_below";
}

CutoffDirection parse_cutoff_direction(const std::string& text) {
  if (text == "discard_above" || text == "above") return CutoffDirection::DiscardAbove;
  if (text == "discard_below" || text == "below") return CutoffDirection::DiscardBelow;
  throw ConfigError("unknown cutoff direction '" + text + "' (expected discard_above|discard_below)");
}

namespace {

void check_sorted(const std::vector<double>& t) {
  if (t.empty()) throw ConfigError("cutoff scan: no thresholds");
  if (!std::is_sorted(t.begin(), t.end())) throw ConfigError("cutoff scan: thresholds must be sorted ascending");
}

bool discarded(double v, double t, CutoffDirection d) {
  return d == CutoffDirection::DiscardAbove ? v > t : v < t;
}

}  // namespace

std::vector<CutoffPoint> coupling_cutoff_scan(const Eigen::Ref<const Matrix>& couplings, const std::vector<int>& sector_ids,
                                              std::size_t sector_count, const std::vector<double>& thresholds,
                                              CutoffDirection direction) {
  check_sorted(thresholds);
  check_weights(couplings);
  std::vector<CutoffPoint> out;
  const Eigen::Index n = couplings.rows();
  for (double t : thresholds) {
    Matrix w = couplings;
    std::size_t kept = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (discarded(couplings(i, j), t, direction))
          w(i, j) = w(j, i) = kAbsent;
        else
          ++kept;
      }
    if (kept == 0) throw NumericError("coupling cutoff " + detail::fmt(t) + " discards every coupling");
    MstResult r = analyze_mst(w, sector_ids, sector_count);
    out.push_back(CutoffPoint{t, r.q, r.disconnected, kept});
  }
  return out;
}

Matrix truncate_spectrum(const Eigen::Ref<const Matrix>& couplings, double threshold, CutoffDirection direction,
                         std::size_t* kept) {
  check_weights(couplings);
  Eigen::SelfAdjointEigenSolver<Matrix> es(couplings);
  const Eigen::Index n = couplings.rows();
  Matrix out = Matrix::Zero(n, n);
  std::size_t count = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double lam = es.eigenvalues()(c);
    if (discarded(lam, threshold, direction)) continue;
    const auto v = es.eigenvectors().col(c);
    out.noalias() += lam * v * v.transpose();
    ++count;
  }
  if (count == 0) throw NumericError("eigenvalue cutoff " + detail::fmt(threshold) + " keeps no eigenmode");
  out = (0.5 * (out + out.transpose())).eval();
  out.diagonal().setZero();
  if (kept) *kept = count;
  return out;
}

std::vector<CutoffPoint> eigen_cutoff_scan(const Eigen::Ref<const Matrix>& couplings, const std::vector<int>& sector_ids,
                                           std::size_t sector_count, const std::vector<double>& thresholds,
                                           CutoffDirection direction) {
  check_sorted(thresholds);
  std::vector<CutoffPoint> out;
  for (double t : thresholds) {
    std::size_t kept = 0;
    Matrix w = truncate_spectrum(couplings, t, direction, &kept);
    MstResult r = analyze_mst(w, sector_ids, sector_count);
    out.push_back(CutoffPoint{t, r.q, r.disconnected, kept});
  }
  return out;
}

SectorBaseline random_sector_baseline(const std::vector<Edge>& tree, const std::vector<int>& sector_ids,
                                      std::size_t sector_count, std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw ConfigError("random_sector_baseline: need at least two trials");
  std::mt19937_64 rng(seed);
  std::vector<int> ids = sector_ids;
  std::vector<double> qs;
  qs.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t k = ids.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(ids[k - 1], ids[pick(rng)]);
    }
    qs.push_back(q_mst(sector_clusters(tree, ids, sector_count), ids.size()));
  }
  SectorBaseline b;
  b.trials = trials;
  MomentSummary s = summarize(qs);
  b.mean = s.mean;
  b.std = s.std;
  b.lower = quantile(qs, 0.0015);
  b.upper = quantile(qs, 0.9985);
  return b;
}

}  // namespace im
