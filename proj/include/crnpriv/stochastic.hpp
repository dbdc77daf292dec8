#pragma once

// Exact continuous-time Markov chain machinery for a reaction network:
// reachable states, generator, transient and stationary master-equation
// solutions, finite state projection and Gillespie sampling.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "crnpriv/crn.hpp"

namespace crnpriv {

inline constexpr std::size_t kDefaultStateCap = 5'000'000;

/// Breadth-first ordered set of population vectors.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<PopulationVector> states);

  std::size_t size() const noexcept { return states_.size(); }
  const PopulationVector& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<PopulationVector>& states() const noexcept { return states_; }
  std::optional<std::size_t> find(const PopulationVector& x) const;
  bool contains(const PopulationVector& x) const { return find(x).has_value(); }

 private:
  std::vector<PopulationVector> states_;
  std::unordered_map<PopulationVector, std::size_t, PopulationHash> index_;
};

/// Closure of x0 under reactions with positive propensity.
/// Throws ExplosionGuard when more than `cap` states are discovered.
StateSpace reachable_states(const Crn& crn, const PopulationVector& x0, std::size_t cap = kDefaultStateCap);

/// Transition-rate matrix with K(i, j) = rate from state j into state i, so
/// that d(pi)/dt = K pi and every column sums to zero. Transitions leaving
/// the space only contribute to the diagonal (probability leaks out).
using Generator = Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>;
Generator generator(const Crn& crn, const StateSpace& space);

/// Probability mass over an enumerated state space.
struct DistributionTable {
  StateSpace space;
  std::vector<double> probs;
  std::optional<double> time;  // nullopt means stationary
  double pruned_mass = 0.0;    // FSP error bound; zero for exact solves

  double total() const;
};

struct CmeOptions {
  double tol = 1e-9;              // truncation budget of the uniformization series
  double fsp_threshold = 0.0;     // zero disables finite state projection
  double fsp_step = 1.0;          // macro-step between re-expansions
  int fsp_depth = 4;              // reaction hops added around the support at each re-expansion
  std::size_t state_cap = kDefaultStateCap;
};

/// pi(tau) = exp(K tau) pi(0) by uniformization with pi(0) a point mass at x0.
DistributionTable cme_solve(const Crn& crn, const PopulationVector& x0, double tau, const CmeOptions& opts = {});

/// exp(K tau) applied to a distribution over `space`; mass leaking out of the
/// space is lost. `tol` bounds the truncated Poisson tail.
std::vector<double> uniformization(const Generator& k, const std::vector<double>& p0, double tau, double tol);

/// Normalized null vector of K on the reachable class of x0.
/// Throws Reducible if the class is not strongly connected.
DistributionTable cme_steady_state(const Crn& crn, const PopulationVector& x0, std::size_t cap = kDefaultStateCap);

/// Stationary vector of an irreducible generator.
std::vector<double> stationary_vector(const Generator& k);

/// Strongly connected (every state reaches every other) under the generator.
bool is_irreducible(const Generator& k);

struct PruneResult {
  StateSpace space;
  std::vector<double> probs;
  double pruned_mass = 0.0;
};

/// Drop states with probability below threshold. Remaining mass is left as is.
PruneResult fsp_prune(const StateSpace& space, const std::vector<double>& probs, double threshold);

/// Named, seedable generator shared by every sampler.
using Rng = std::mt19937_64;
inline constexpr const char* kRngName = "mt19937_64";

/// Uniform double in [0, 1) built from the top 53 bits.
double uniform01(Rng& rng);

/// Seed for replicate i of a seeded ensemble.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) { return seed ^ replicate; }

/// One exact Gillespie trajectory evaluated at time tau.
PopulationVector ssa_sample(const Crn& crn, const PopulationVector& x0, double tau, std::uint64_t seed);
PopulationVector ssa_sample(const Crn& crn, const PopulationVector& x0, double tau, Rng& rng);

}  // namespace crnpriv
