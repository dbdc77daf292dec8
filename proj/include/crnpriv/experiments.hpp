#pragma once

// Parameter sweeps over populations, rate groups and collaboration-tree
// shapes, plus the statistics used to summarize them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crnpriv/privacy.hpp"
#include "crnpriv/spec_parser.hpp"
#include "crnpriv/structure.hpp"

namespace crnpriv {

/// Sum over y of pi_y * (sum_i i*y_i) / (sum_i y_i), where query position i
/// (1-based) holds aggregates of size i. Observations with no aggregates are
/// dropped from both the sum and the normalizer.
double average_aggregate_size(const ObservableDistribution& pi_y);

/// Sample Pearson correlation. Throws DegenerateInput for fewer than two
/// points or a constant series, DimensionMismatch for unequal lengths.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Worker count: `requested` if non-zero, else CRNPRIV_THREADS, else the
/// hardware concurrency.
unsigned resolve_threads(unsigned requested);

struct AnalysisOptions {
  LeakageOptions leakage;
  std::optional<double> tau;  // nullopt means steady state
  bool force_cme = false;
};

/// Closed-form aggregated leakage when the network is certified
/// complex-balanced and the snapshot is stationary; master equation otherwise.
LeakageReport auto_leakage(const Crn& crn, const Composition& db, const QuerySpec& q, const AnalysisOptions& opts);

struct SweepAxis {
  enum class Kind { Population, Rate };
  Kind kind = Kind::Population;
  std::string name;
  std::size_t type = 0;                // Population: type index
  std::vector<std::size_t> reactions;  // Rate: reaction indices sharing the value
  std::vector<double> values;
};

SweepAxis population_axis(const Crn& crn, const std::string& type_name, std::vector<double> values);
SweepAxis rate_axis(const Crn& crn, std::vector<std::size_t> reactions, std::vector<double> values);

/// lo, lo+step, ... up to hi (inclusive within a small tolerance).
std::vector<double> grid(double lo, double hi, double step);

struct SweepCell {
  std::vector<double> coords;
  std::optional<LeakageReport> report;
  std::string error;  // set when the cell failed
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepCell> cells;  // first axis slowest
  std::string method;
  double nu = 0.0;
  std::optional<double> tau;

  /// Index of the smallest finite epsilon (first in grid order on ties).
  std::optional<std::size_t> argmin() const;
  std::string to_csv() const;
  std::string to_json() const;
};

struct SweepOptions {
  AnalysisOptions analysis;
  unsigned threads = 0;
};

/// Cartesian sweep; every cell is emitted, failed cells carry the error text.
SweepResult sweep(const ModelFile& model, const std::vector<SweepAxis>& axes, const SweepOptions& opts = {});

SweepResult population_sweep(const ModelFile& model, const std::string& type_a, const std::string& type_b,
                             std::vector<double> values_a, std::vector<double> values_b, const SweepOptions& opts = {});
SweepResult rate_sweep(const ModelFile& model, std::vector<std::size_t> group_a, std::vector<std::size_t> group_b,
                       std::vector<double> values_a, std::vector<double> values_b, const SweepOptions& opts = {});

enum class TreeRates { FixedUnit, RandomUniform };

struct TreeSweepOptions {
  TreeRates rates = TreeRates::FixedUnit;
  std::size_t draws = 200;  // random mode only
  std::uint64_t seed = 42;
  std::int64_t per_type = 2;
  double rate_lo = 0.1;  // forward rates in random mode; backward rates stay 1
  double rate_hi = 2.0;
  LeakageOptions leakage;
  unsigned threads = 0;
  bool enumerate_only = false;
};

struct TreeRow {
  std::size_t index = 0;
  std::string shape;
  int depth = 0;
  std::vector<double> forward_rates;  // internal nodes in post order
  std::optional<double> epsilon;
  std::optional<double> avg_group_size;
  std::string error;
};

struct TreeSweepResult {
  int leaves = 0;
  TreeRates rates = TreeRates::FixedUnit;
  std::uint64_t seed = 0;
  std::int64_t per_type = 0;
  std::vector<TreeRow> rows;
  std::optional<double> pearson_depth;       // corr(depth, epsilon)
  std::optional<double> pearson_group_size;  // corr(avg group size, epsilon)

  std::string to_csv() const;
};

/// Most balanced shape with n leaves (perfect for powers of two).
CollabTree near_balanced_tree(int n_leaves);

/// Fixed mode: every shape with n leaves and unit rates. Random mode: the
/// near-balanced shape with `draws` forward-rate vectors, drawn draw-major
/// and node-minor from one seeded stream.
TreeSweepResult tree_sweep(int n_leaves, const TreeSweepOptions& opts = {});

}  // namespace crnpriv
