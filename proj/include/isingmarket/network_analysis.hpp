#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isingmarket/common.hpp"

namespace im {

/// ticker -> industry sector.
class SectorMap {
 public:
  SectorMap() = default;
  void add(const std::string& ticker, const std::string& sector, const std::string& name = {});

  const std::vector<std::string>& sectors() const { return sectors_; }
  bool contains(const std::string& ticker) const { return sector_of_.count(ticker) != 0; }
  const std::string& sector_of(const std::string& ticker) const;

  /// Sector index per ticker, in `tickers` order. Throws ConfigError naming
  /// the first ticker without a sector.
  std::vector<int> indices(const std::vector<std::string>& tickers) const;

 private:
  std::map<std::string, std::string> sector_of_;
  std::map<std::string, int> sector_index_;
  std::vector<std::string> sectors_;
};

/// Reads `ticker,name,sector` (header required).
SectorMap read_sectors_csv(const std::string& path);
SectorMap parse_sectors_csv(const std::string& text);

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 0.0;
};

/// Maximum-weight spanning tree by Prim's algorithm from node 0. At every step
/// the outside node with the strongest link to the tree joins; ties go to the
/// smallest (min, max) index pair. Entries equal to -inf are treated as
/// absent; when nothing remains the next tree starts at the smallest outside
/// node and the result is a forest.
struct SpanningForest {
  std::vector<Edge> edges;
  std::size_t components = 1;
  bool disconnected() const { return components > 1; }
};

SpanningForest build_mst(const Eigen::Ref<const Matrix>& weights);

/// Sum of edge weights in canonical (i, j) order.
double total_weight(const std::vector<Edge>& edges);

/// Cluster sizes per sector: components of the subgraph made of each
/// sector's nodes and the tree edges joining two nodes of that sector. Each
/// list is sorted descending.
std::vector<std::vector<std::size_t>> sector_clusters(const std::vector<Edge>& tree, const std::vector<int>& sector_ids,
                                                      std::size_t sector_count);

/// (1/N) sum_m max_k N_{m,k}. Sectors with no members contribute nothing.
double q_mst(const std::vector<std::vector<std::size_t>>& clusters, std::size_t n);

struct MstResult {
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> max_cluster;  // per sector
  double q = 0.0;
  std::size_t components = 1;
  bool disconnected = false;
};

MstResult analyze_mst(const Eigen::Ref<const Matrix>& weights, const std::vector<int>& sector_ids,
                      std::size_t sector_count);

enum class CutoffDirection { DiscardAbove, DiscardBelow };
std::string to_string(CutoffDirection d);
CutoffDirection parse_cutoff_direction(const std::string& text);

struct CutoffPoint {
  double threshold = 0.0;
  double q = 0.0;
  bool disconnected = false;
  std::size_t kept = 0;  // surviving couplings (pairs) or eigenmodes
};

/// Per threshold, drops couplings beyond the cutoff (J_ij > t for
/// DiscardAbove, J_ij < t for DiscardBelow) and measures Q_mst on what is
/// left. Thresholds must be sorted ascending.
std::vector<CutoffPoint> coupling_cutoff_scan(const Eigen::Ref<const Matrix>& couplings, const std::vector<int>& sector_ids,
                                              std::size_t sector_count, const std::vector<double>& thresholds,
                                              CutoffDirection direction);

/// Rebuilds J from the eigenmodes passing the cutoff, zeroes the diagonal.
Matrix truncate_spectrum(const Eigen::Ref<const Matrix>& couplings, double threshold, CutoffDirection direction,
                         std::size_t* kept = nullptr);

std::vector<CutoffPoint> eigen_cutoff_scan(const Eigen::Ref<const Matrix>& couplings, const std::vector<int>& sector_ids,
                                           std::size_t sector_count, const std::vector<double>& thresholds,
                                           CutoffDirection direction);

/// Q_mst of a fixed tree under random relabelings that keep sector sizes.
struct SectorBaseline {
  double mean = 0.0;
  double std = 0.0;
  double lower = 0.0;  // 0.15th percentile
  double upper = 0.0;  // 99.85th percentile
  std::size_t trials = 0;
};

SectorBaseline random_sector_baseline(const std::vector<Edge>& tree, const std::vector<int>& sector_ids,
                                      std::size_t sector_count, std::size_t trials, std::uint64_t seed);

}  // namespace im
