#pragma once

// Differential-privacy leakage of a population's type composition against an
// adversary who observes the (aggregated) system state at one snapshot.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "crnpriv/crn.hpp"
#include "crnpriv/deterministic.hpp"
#include "crnpriv/stochastic.hpp"

namespace crnpriv {

/// One agent moved from type `from` to type `to`.
struct AdjacencyPair {
  Composition base;
  Composition variant;
  std::size_t from = 0;
  std::size_t to = 0;
};

/// Every single-agent move, source-type major and destination-type minor.
std::vector<AdjacencyPair> adjacent_compositions(const Composition& db);

/// Each type's agents in its initial state, resource states at their fixed
/// counts, everything else empty. Throws MissingInitialState.
PopulationVector initial_state(const Composition& db, const Crn& crn);

/// log of prod_i xbar_i^x_i / x_i! * exp(-xbar_i). A zero mean with a positive
/// count gives -infinity.
double log_product_poisson(const MeanState& xbar, const PopulationVector& x);

/// Unnormalized product-Poisson stationary law.
double stationary_product_poisson(const MeanState& xbar, const PopulationVector& x);
/// The same law renormalized over a finite class (zero outside it).
double stationary_product_poisson(const MeanState& xbar, const PopulationVector& x, const StateSpace& space);

/// Unnormalized: the product formula as is, evaluated on any x.
/// ClassRenormalized: divided by its mass over the reachable class, zero off it.
enum class StationaryLaw { Unnormalized, ClassRenormalized };
enum class LeakageMethod { ClosedFormIdentity, ClosedFormQuery, CmeSnapshot };

std::string to_string(StationaryLaw law);
std::string to_string(LeakageMethod method);

using ObservableDistribution = std::map<Observation, double>;

/// Pushforward of a distribution through the query.
ObservableDistribution observable_distribution(const DistributionTable& pi, const QuerySpec& q);

/// Memoized observable laws keyed by composition, rates and analysis. A cache
/// must only be shared between calls that use the same query.
class LawCache {
 public:
  struct Key {
    Composition composition;
    std::vector<double> rates;
    int analysis = 0;
    double tau = 0.0;
    auto operator<=>(const Key&) const = default;
  };

  std::shared_ptr<const ObservableDistribution> find(const Key& key) const;
  void insert(const Key& key, std::shared_ptr<const ObservableDistribution> law);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const ObservableDistribution>> laws_;
};

struct LeakageOptions {
  double nu = 1e-12;
  /// Closed-form law; unset means Unnormalized for the identity analysis and
  /// ClassRenormalized for aggregated queries.
  std::optional<StationaryLaw> law;
  CmeOptions cme;
  SteadyStateOptions steady;
  LawCache* cache = nullptr;
};

struct LeakageArgmax {
  Composition variant;
  Observation observation;
};

struct LeakageReport {
  double epsilon = 0.0;
  Composition argmax_variant;
  Observation argmax_observation;  // y, or the state x for the identity analysis
  LeakageMethod method = LeakageMethod::CmeSnapshot;
  std::optional<StationaryLaw> law;  // closed forms only
  double nu = 0.0;
  std::optional<double> tau;  // nullopt means steady state
  std::vector<LeakageArgmax> argmaxima;  // every maximizer within 1e-12 of epsilon
  std::size_t variants = 0;
  /// Identity analysis: (variant, x) evaluations where a law was read at an x
  /// outside its own reachable class, and whether the maximizer was one.
  std::size_t outside_class_evaluations = 0;
  bool argmax_outside_class = false;
};

/// |ln((p + nu) / (p' + nu))| from log-probabilities; nu = 0 gives the plain
/// log-ratio (possibly infinite).
double smoothed_log_ratio(double log_p, double log_q, double nu);

/// Product-Poisson leakage over x in X(D) and X(D') for every adjacent D'.
/// Throws NotComplexBalanced unless weakly reversible with deficiency zero.
LeakageReport leakage_steady_identity(const Crn& crn, const Composition& db, const LeakageOptions& opts = {});

/// Product-Poisson leakage through an aggregating query (fiber sums).
LeakageReport leakage_steady_query(const Crn& crn, const Composition& db, const QuerySpec& q,
                                   const LeakageOptions& opts = {});

/// Leakage from master-equation distributions at time tau, or at steady state
/// when tau is nullopt. Works for any network.
LeakageReport leakage_snapshot(const Crn& crn, const Composition& db, const QuerySpec& q, std::optional<double> tau,
                               const LeakageOptions& opts = {});

/// Observable law used by the analyses above (exposed for reports and sweeps).
ObservableDistribution closed_form_observable(const Crn& crn, const Composition& db, const QuerySpec& q,
                                              StationaryLaw law, const SteadyStateOptions& steady = {},
                                              std::size_t cap = kDefaultStateCap);
ObservableDistribution cme_observable(const Crn& crn, const Composition& db, const QuerySpec& q,
                                      std::optional<double> tau, const CmeOptions& opts = {});

}  // namespace crnpriv
