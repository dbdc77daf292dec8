#include "crnpriv/crn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <boost/container_hash/hash.hpp>
#include <fmt/format.h>

#include "crnpriv/error.hpp"

namespace crnpriv {

PopulationVector::PopulationVector(std::vector<Count> counts) : counts_(std::move(counts)) {
  for (Count c : counts_) {
    if (c < 0) throw ValidationError("population counts must be non-negative");
  }
}

PopulationVector::PopulationVector(std::initializer_list<Count> counts)
    : PopulationVector(std::vector<Count>(counts)) {}

std::int64_t PopulationVector::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::size_t PopulationHash::operator()(const PopulationVector& x) const noexcept {
  return boost::hash_range(x.counts().begin(), x.counts().end());
}

Crn::Crn(std::vector<std::string> state_labels, std::vector<TypeInfo> types,
         const std::vector<ReactionInput>& reactions)
    : labels_(std::move(state_labels)), types_(std::move(types)) {
  const std::size_t n = labels_.size();
  {
    std::unordered_set<std::string> seen;
    for (const auto& label : labels_) {
      if (label.empty()) throw ValidationError("empty state label");
      if (!seen.insert(label).second) throw ValidationError("duplicate state '" + label + "'");
    }
    seen.clear();
    for (const auto& t : types_) {
      if (!seen.insert(t.name).second) throw ValidationError("duplicate type '" + t.name + "'");
      if (t.initial_state && *t.initial_state >= n)
        throw ValidationError("initial state of type '" + t.name + "' out of range");
    }
  }

  auto intern = [&](const Complex& c) {
    if (c.size() != n) throw DimensionMismatch("complex length differs from the number of states");
    for (Count v : c) {
      if (v < 0) throw ValidationError("complex coefficients must be non-negative");
    }
    auto it = std::find(complexes_.begin(), complexes_.end(), c);
    if (it != complexes_.end()) return static_cast<std::size_t>(it - complexes_.begin());
    complexes_.push_back(c);
    return complexes_.size() - 1;
  };

  for (const auto& r : reactions) {
    if (!std::isfinite(r.rate) || r.rate <= 0.0)
      throw ValidationError(fmt::format("rate constant must be positive and finite, got {}", r.rate));
    const std::size_t s = intern(r.reactants);
    const std::size_t t = intern(r.products);
    if (s == t) throw ValidationError("reaction source and target complexes are identical");
    reactions_.push_back({s, t, r.rate});
    std::vector<Count> delta(n);
    for (std::size_t i = 0; i < n; ++i) delta[i] = r.products[i] - r.reactants[i];
    changes_.push_back(std::move(delta));
  }
}

std::optional<std::size_t> Crn::state_index(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::optional<std::size_t> Crn::type_index(const std::string& name) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name == name) return i;
  }
  return std::nullopt;
}

Crn Crn::with_rates(std::span<const double> rates) const {
  if (rates.size() != reactions_.size()) throw DimensionMismatch("rate vector length differs from reaction count");
  std::vector<ReactionInput> inputs;
  inputs.reserve(reactions_.size());
  for (std::size_t l = 0; l < reactions_.size(); ++l) {
    inputs.push_back({complexes_[reactions_[l].source], complexes_[reactions_[l].target], rates[l]});
  }
  return Crn(labels_, types_, inputs);
}

std::vector<double> Crn::rates() const {
  std::vector<double> out;
  out.reserve(reactions_.size());
  for (const auto& r : reactions_) out.push_back(r.rate);
  return out;
}

bool Crn::operator==(const Crn& other) const {
  return labels_ == other.labels_ && types_ == other.types_ && complexes_ == other.complexes_ &&
         reactions_ == other.reactions_;
}

std::vector<std::string> state_tags(const std::string& label) {
  const auto open = label.find('{');
  const auto close = label.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return {label};
  std::vector<std::string> tags;
  std::string current;
  for (std::size_t i = open + 1; i < close; ++i) {
    if (label[i] == ',') {
      if (!current.empty()) tags.push_back(current);
      current.clear();
    } else if (label[i] != ' ') {
      current.push_back(label[i]);
    }
  }
  if (!current.empty()) tags.push_back(current);
  return tags;
}

IntMatrix type_membership(const Crn& crn) {
  IntMatrix m = IntMatrix::Zero(static_cast<Eigen::Index>(crn.num_types()),
                                static_cast<Eigen::Index>(crn.num_states()));
  for (std::size_t i = 0; i < crn.num_states(); ++i) {
    for (const auto& tag : state_tags(crn.labels()[i])) {
      if (auto s = crn.type_index(tag)) m(static_cast<Eigen::Index>(*s), static_cast<Eigen::Index>(i)) += 1;
    }
  }
  return m;
}

std::int64_t Composition::total() const noexcept {
  return std::accumulate(per_type.begin(), per_type.end(), std::int64_t{0});
}

QuerySpec::QuerySpec(std::vector<Group> groups, std::size_t num_states) : groups_(std::move(groups)) {
  std::vector<bool> used(num_states, false);
  for (const auto& g : groups_) {
    for (std::size_t s : g.states) {
      if (s >= num_states) throw ValidationError("query group '" + g.name + "' references an unknown state");
      if (used[s]) throw ValidationError("query groups are not disjoint (group '" + g.name + "')");
      used[s] = true;
    }
  }
}

QuerySpec QuerySpec::identity(const Crn& crn) {
  std::vector<Group> groups;
  for (std::size_t i = 0; i < crn.num_states(); ++i) groups.push_back({crn.labels()[i], {i}});
  return QuerySpec(std::move(groups), crn.num_states());
}

IntMatrix stoichiometry_matrix(const Crn& crn) {
  IntMatrix gamma(static_cast<Eigen::Index>(crn.num_states()), static_cast<Eigen::Index>(crn.num_reactions()));
  for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
    for (std::size_t i = 0; i < crn.num_states(); ++i) {
      gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = crn.changes()[l][i];
    }
  }
  return gamma;
}

double propensity(const Crn& crn, const PopulationVector& x, std::size_t reaction) {
  const Complex& rho = crn.reactants(reaction);
  double value = crn.reactions()[reaction].rate;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] == 0) continue;
    if (x[i] < rho[i]) return 0.0;
    for (Count k = 0; k < rho[i]; ++k) value *= x[i];
  }
  return value;
}

std::vector<double> propensity(const Crn& crn, const PopulationVector& x) {
  if (x.size() != crn.num_states()) throw DimensionMismatch("population vector length differs from the number of states");
  std::vector<double> r(crn.num_reactions());
  for (std::size_t l = 0; l < r.size(); ++l) r[l] = propensity(crn, x, l);
  return r;
}

PopulationVector apply_reaction(const PopulationVector& x, const Crn& crn, std::size_t reaction) {
  if (x.size() != crn.num_states()) throw DimensionMismatch("population vector length differs from the number of states");
  if (reaction >= crn.num_reactions()) throw RangeError("reaction index out of range");
  const Complex& rho = crn.reactants(reaction);
  std::vector<Count> next(x.counts().begin(), x.counts().end());
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (x[i] < rho[i]) {
      throw InsufficientReactants(fmt::format("reaction {} needs {} of '{}' but only {} present", reaction + 1,
                                              rho[i], crn.labels()[i], x[i]));
    }
    next[i] += crn.changes()[reaction][i];
  }
  return PopulationVector(std::move(next));
}

Observation evaluate_query(const QuerySpec& q, const PopulationVector& x) {
  Observation y(q.size(), 0);
  for (std::size_t g = 0; g < q.size(); ++g) {
    for (std::size_t s : q.groups()[g].states) {
      if (s >= x.size()) throw DimensionMismatch("query references a state outside the population vector");
      y[g] += x[s];
    }
  }
  return y;
}

}  // namespace crnpriv
