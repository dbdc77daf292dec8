#pragma once

// Core reaction-network types: states, complexes, mass-action reactions,
// population vectors and aggregate observation queries.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace crnpriv {

using Count = std::int32_t;
using Complex = std::vector<Count>;  // coefficient per state
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Non-negative integer occupancy per state.
class PopulationVector {
 public:
  PopulationVector() = default;
  explicit PopulationVector(std::vector<Count> counts);
  PopulationVector(std::initializer_list<Count> counts);

  std::size_t size() const noexcept { return counts_.size(); }
  Count operator[](std::size_t i) const { return counts_[i]; }
  std::span<const Count> counts() const noexcept { return counts_; }
  std::int64_t total() const noexcept;

  auto operator<=>(const PopulationVector&) const = default;

 private:
  std::vector<Count> counts_;
};

struct PopulationHash {
  std::size_t operator()(const PopulationVector& x) const noexcept;
};

struct TypeInfo {
  std::string name;
  std::optional<std::size_t> initial_state;  // state index receiving the type's agents
  bool operator==(const TypeInfo&) const = default;
};

struct Reaction {
  std::size_t source = 0;  // complex index
  std::size_t target = 0;  // complex index
  double rate = 0.0;
  bool operator==(const Reaction&) const = default;
};

/// A reaction given by its reactant/product coefficient vectors.
struct ReactionInput {
  Complex reactants;
  Complex products;
  double rate = 0.0;
};

/// Immutable mass-action reaction network.
///
/// States keep their declaration order. Complexes are deduplicated in order
/// of first appearance (reactants before products, reaction by reaction).
class Crn {
 public:
  Crn() = default;
  /// Throws ValidationError on duplicate labels, bad indices, negative
  /// coefficients, identical source/target or a non-positive/non-finite rate.
  Crn(std::vector<std::string> state_labels, std::vector<TypeInfo> types,
      const std::vector<ReactionInput>& reactions);

  std::size_t num_states() const noexcept { return labels_.size(); }
  std::size_t num_complexes() const noexcept { return complexes_.size(); }
  std::size_t num_reactions() const noexcept { return reactions_.size(); }
  std::size_t num_types() const noexcept { return types_.size(); }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<TypeInfo>& types() const noexcept { return types_; }
  const std::vector<Complex>& complexes() const noexcept { return complexes_; }
  const std::vector<Reaction>& reactions() const noexcept { return reactions_; }
  const Complex& reactants(std::size_t reaction) const { return complexes_[reactions_[reaction].source]; }
  const Complex& products(std::size_t reaction) const { return complexes_[reactions_[reaction].target]; }

  std::optional<std::size_t> state_index(const std::string& label) const;
  std::optional<std::size_t> type_index(const std::string& name) const;

  /// Integer change vector per reaction (column l of the stoichiometry matrix).
  const std::vector<std::vector<Count>>& changes() const noexcept { return changes_; }

  /// Copy with replaced rate constants (same topology).
  Crn with_rates(std::span<const double> rates) const;
  std::vector<double> rates() const;

  bool operator==(const Crn& other) const;

 private:
  std::vector<std::string> labels_;
  std::vector<TypeInfo> types_;
  std::vector<Complex> complexes_;
  std::vector<Reaction> reactions_;
  std::vector<std::vector<Count>> changes_;
};

/// Type tags carried by a state label. `x{A,R}` carries {A, R}; a label
/// without braces carries itself. Tags repeat for multiplicities (`a{1,1,2}`).
std::vector<std::string> state_tags(const std::string& label);

/// Multiplicity of each declared type in each state (N_S rows, N_A columns).
IntMatrix type_membership(const Crn& crn);

/// Counts of agents per type plus fixed counts for resource states.
struct Composition {
  std::vector<std::int64_t> per_type;  // aligned with Crn::types()
  std::vector<std::pair<std::size_t, std::int64_t>> resources;  // (state index, count), sorted by state

  std::int64_t total() const noexcept;
  auto operator<=>(const Composition&) const = default;
};

/// Disjoint groups of states whose counts are summed into the observation.
class QuerySpec {
 public:
  struct Group {
    std::string name;
    std::vector<std::size_t> states;
    bool operator==(const Group&) const = default;
  };

  QuerySpec() = default;
  /// Throws ValidationError if groups overlap or reference states >= num_states.
  QuerySpec(std::vector<Group> groups, std::size_t num_states);

  /// Identity query: one singleton group per state.
  static QuerySpec identity(const Crn& crn);

  const std::vector<Group>& groups() const noexcept { return groups_; }
  std::size_t size() const noexcept { return groups_.size(); }
  bool operator==(const QuerySpec&) const = default;

 private:
  std::vector<Group> groups_;
};

using Observation = std::vector<std::int64_t>;

IntMatrix stoichiometry_matrix(const Crn& crn);

/// Mass-action propensity of every reaction at x. Zero whenever a reactant
/// count is below its multiplicity.
std::vector<double> propensity(const Crn& crn, const PopulationVector& x);
double propensity(const Crn& crn, const PopulationVector& x, std::size_t reaction);

/// x + (products - reactants) of reaction l.
PopulationVector apply_reaction(const PopulationVector& x, const Crn& crn, std::size_t reaction);

Observation evaluate_query(const QuerySpec& q, const PopulationVector& x);

}  // namespace crnpriv
