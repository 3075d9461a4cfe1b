#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isingmarket/data_ingest.hpp"
#include "isingmarket/inference.hpp"
#include "isingmarket/network_analysis.hpp"
#include "isingmarket/synthetic.hpp"

namespace im {

/// Everything a command needs. Built from `key=value` text (config files and
/// CLI flags share the same keys) so a run can be echoed and replayed.
struct RunConfig {
  // inputs and outputs
  std::string prices;
  std::string sectors;
  std::string params;
  std::string params_b;
  std::string out_dir = "out";

  ReturnKind transform = ReturnKind::Binary;
  WindowSpec window;
  std::string window_date;  // single-window commands; empty = last window

  InferenceConfig inference;
  std::vector<Method> methods{Method::NMF};
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool strict = false;

  // analysis selections
  bool stats = true;
  bool mst = true;
  bool cutoffs = false;
  bool scaling = false;
  bool energy = true;
  bool third_order = false;
  bool compare = true;
  bool bootstrap = false;
  std::size_t bootstrap_resamples = 1000;
  double bootstrap_level = 0.95;
  std::size_t eigen_k = 4;
  std::string matrices = "last";  // none | last | all
  std::string mst_matrix = "J";   // J | C | Q

  std::vector<double> coupling_thresholds;  // empty = automatic quantile grid
  std::vector<double> eigen_thresholds;     // empty = between consecutive eigenvalues
  std::string cutoff_direction = "both";

  std::vector<std::size_t> scaling_sizes;
  std::size_t scaling_repeats = 20;
  std::size_t subset_size = 20;
  std::vector<std::size_t> subset_totals;
  std::size_t baseline_trials = 1000;

  // synth
  std::string synth_model = "block";  // block | params | gbm
  BlockModelSpec block;
  SyntheticOptions synth;
  GbmSpec gbm;

  /// Applies one setting. Throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Reads `key = value` lines; `#` starts a comment.
  void load_file(const std::string& path);
  void parse_text(const std::string& text);
  /// Effective settings in key order, as given.
  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string get(const std::string& key) const;

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> entries_;
};

const std::vector<std::string>& commands();

/// Runs one subcommand. Returns 0 on success and 4 for non-convergence under
/// `strict`. Other failures throw im::Error after leaving a `.partial` marker
/// and a failed manifest in the output directory.
int run_command(const std::string& command, const RunConfig& config);

const char* version();

}  // namespace im
