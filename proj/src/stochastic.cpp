#include "crnpriv/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "crnpriv/error.hpp"

namespace crnpriv {
namespace {

// Sparse LU is only tried as a fallback, and only on spaces up to this size.
constexpr std::size_t kDirectSolveLimit = 12'000;
// Accepted stationary vectors satisfy |K p|_1 <= this * max outflow rate.
constexpr double kResidualTolerance = 1e-11;
constexpr int kPolishSweeps = 200;
constexpr double kPolishTolerance = 1e-13;

std::vector<bool> reach(const Generator& k, bool transpose) {
  const auto n = static_cast<std::size_t>(k.cols());
  std::vector<std::vector<std::size_t>> adj;
  if (transpose) {
    adj.resize(n);
    for (Eigen::Index j = 0; j < k.outerSize(); ++j)
      for (Generator::InnerIterator it(k, j); it; ++it)
        if (it.row() != j && it.value() > 0.0) adj[static_cast<std::size_t>(it.row())].push_back(static_cast<std::size_t>(j));
  }
  std::vector<bool> seen(n, false);
  if (n == 0) return seen;
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t j = stack.back();
    stack.pop_back();
    if (transpose) {
      for (auto i : adj[j])
        if (!seen[i]) {
          seen[i] = true;
          stack.push_back(i);
        }
    } else {
      for (Generator::InnerIterator it(k, static_cast<Eigen::Index>(j)); it; ++it) {
        const auto i = static_cast<std::size_t>(it.row());
        if (i != j && it.value() > 0.0 && !seen[i]) {
          seen[i] = true;
          stack.push_back(i);
        }
      }
    }
  }
  return seen;
}

std::vector<double> normalized(Eigen::VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] < 0.0) v[i] = 0.0;
  const double s = v.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("stationary solve produced no probability mass");
  v /= s;
  return {v.data(), v.data() + v.size()};
}

// Symmetric Gauss-Seidel sweeps on the balance equations with x[0] pinned.
// Every update is a ratio of non-negative sums, so small probabilities are
// recovered to full relative precision from an absolutely accurate start.
void gauss_seidel_polish(const Eigen::SparseMatrix<double>& k, Eigen::VectorXd& x) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = k;
  const Eigen::Index n = x.size();
  auto update = [&](Eigen::Index i) {
    double inflow = 0.0;
    double outflow = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, i); it; ++it) {
      if (it.col() == i) outflow = -it.value();
      else inflow += it.value() * x[it.col()];
    }
    const double v = outflow > 0.0 ? inflow / outflow : x[i];
    const double change = v > 0.0 ? std::abs(v - x[i]) / v : 0.0;
    x[i] = v;
    return change;
  };
  for (int sweep = 0; sweep < kPolishSweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 1; i < n; ++i) change = std::max(change, update(i));
    for (Eigen::Index i = n - 1; i >= 1; --i) change = std::max(change, update(i));
    if (change < kPolishTolerance) break;
  }
}

// States within `depth` reaction hops of `seeds` (seeds first, BFS order).
std::vector<PopulationVector> neighborhood(const Crn& crn, const std::vector<PopulationVector>& seeds, int depth,
                                           std::size_t cap) {
  std::unordered_map<PopulationVector, int, PopulationHash> dist;
  std::vector<PopulationVector> order;
  std::deque<PopulationVector> todo;
  for (const auto& s : seeds) {
    if (dist.emplace(s, 0).second) {
      order.push_back(s);
      todo.push_back(s);
    }
  }
  while (!todo.empty()) {
    const PopulationVector x = todo.front();
    todo.pop_front();
    const int d = dist[x];
    if (d >= depth) continue;
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      if (propensity(crn, x, l) <= 0.0) continue;
      PopulationVector y = apply_reaction(x, crn, l);
      if (dist.emplace(y, d + 1).second) {
        if (order.size() >= cap) throw ExplosionGuard(cap);
        order.push_back(y);
        todo.push_back(std::move(y));
      }
    }
  }
  return order;
}

}  // namespace

StateSpace::StateSpace(std::vector<PopulationVector> states) : states_(std::move(states)) {
  index_.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!index_.emplace(states_[i], i).second) throw ValidationError("duplicate state in state space");
  }
}

std::optional<std::size_t> StateSpace::find(const PopulationVector& x) const {
  auto it = index_.find(x);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateSpace reachable_states(const Crn& crn, const PopulationVector& x0, std::size_t cap) {
  if (x0.size() != crn.num_states()) throw DimensionMismatch("initial state length differs from the number of states");
  std::unordered_map<PopulationVector, std::size_t, PopulationHash> seen;
  std::vector<PopulationVector> order{x0};
  seen.emplace(x0, 0);
  for (std::size_t head = 0; head < order.size(); ++head) {
    const PopulationVector x = order[head];
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      if (propensity(crn, x, l) <= 0.0) continue;
      PopulationVector y = apply_reaction(x, crn, l);
      if (seen.emplace(y, order.size()).second) {
        if (order.size() >= cap) throw ExplosionGuard(cap);
        order.push_back(std::move(y));
      }
    }
  }
  return StateSpace(std::move(order));
}

Generator generator(const Crn& crn, const StateSpace& space) {
  using Triplet = Eigen::Triplet<double, std::int64_t>;
  std::vector<Triplet> entries;
  entries.reserve(space.size() * (crn.num_reactions() + 1));
  for (std::size_t j = 0; j < space.size(); ++j) {
    const PopulationVector& x = space[j];
    double outflow = 0.0;
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      const double r = propensity(crn, x, l);
      if (r <= 0.0) continue;
      outflow += r;
      if (auto i = space.find(apply_reaction(x, crn, l)))
        entries.emplace_back(static_cast<std::int64_t>(*i), static_cast<std::int64_t>(j), r);
    }
    entries.emplace_back(static_cast<std::int64_t>(j), static_cast<std::int64_t>(j), -outflow);
  }
  const auto n = static_cast<std::int64_t>(space.size());
  Generator k(n, n);
  k.setFromTriplets(entries.begin(), entries.end());
  k.makeCompressed();
  return k;
}

double DistributionTable::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

std::vector<double> uniformization(const Generator& k, const std::vector<double>& p0, double tau, double tol) {
  if (tau < 0.0) throw RangeError("snapshot time must be non-negative");
  if (static_cast<Eigen::Index>(p0.size()) != k.cols()) throw DimensionMismatch("distribution length differs from generator size");
  double lambda = 0.0;
  for (Eigen::Index j = 0; j < k.cols(); ++j) lambda = std::max(lambda, -k.coeff(j, j));
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(p0.data(), static_cast<Eigen::Index>(p0.size()));
  if (tau == 0.0 || lambda == 0.0) return p0;
  lambda *= 1.0 + 1e-12;

  // Split so that each step's Poisson mean stays moderate.
  constexpr double kMaxMeanPerStep = 400.0;
  const auto steps = static_cast<long>(std::ceil(lambda * tau / kMaxMeanPerStep));
  const double mean = lambda * tau / static_cast<double>(steps);
  const double step_tol = tol / static_cast<double>(steps);

  Eigen::VectorXd term(p.size());
  Eigen::VectorXd acc(p.size());
  for (long s = 0; s < steps; ++s) {
    term = p;
    acc.setZero();
    double cumulative = 0.0;
    for (long n = 0;; ++n) {
      const double w = std::exp(-mean + static_cast<double>(n) * std::log(mean) - std::lgamma(static_cast<double>(n) + 1.0));
      acc += w * term;
      cumulative += w;
      if (cumulative >= 1.0 - step_tol && static_cast<double>(n) >= mean) break;
      if (n > static_cast<long>(mean + 50.0 * std::sqrt(mean) + 100.0)) break;
      term += (k * term) / lambda;
    }
    p = acc;
  }
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] < 0.0) p[i] = 0.0;
  return {p.data(), p.data() + p.size()};
}

DistributionTable cme_solve(const Crn& crn, const PopulationVector& x0, double tau, const CmeOptions& opts) {
  if (tau < 0.0) throw RangeError("snapshot time must be non-negative");
  DistributionTable table;
  table.time = tau;
  if (opts.fsp_threshold <= 0.0) {
    table.space = reachable_states(crn, x0, opts.state_cap);
    std::vector<double> p0(table.space.size(), 0.0);
    p0[0] = 1.0;
    table.probs = uniformization(generator(crn, table.space), p0, tau, opts.tol);
    return table;
  }

  std::vector<PopulationVector> support{x0};
  std::vector<double> probs{1.0};
  double lost = 0.0;
  double t = 0.0;
  while (t < tau) {
    const double dt = std::min(opts.fsp_step, tau - t);
    StateSpace expanded(neighborhood(crn, support, opts.fsp_depth, opts.state_cap));
    std::vector<double> p(expanded.size(), 0.0);
    std::copy(probs.begin(), probs.end(), p.begin());
    const double before = std::accumulate(p.begin(), p.end(), 0.0);
    p = uniformization(generator(crn, expanded), p, dt, opts.tol);
    lost += std::max(0.0, before - std::accumulate(p.begin(), p.end(), 0.0));
    PruneResult pruned = fsp_prune(expanded, p, opts.fsp_threshold);
    lost += pruned.pruned_mass;
    support = pruned.space.states();
    probs = std::move(pruned.probs);
    t += dt;
  }
  table.space = StateSpace(std::move(support));
  table.probs = std::move(probs);
  table.pruned_mass = std::max(lost, 1.0 - table.total());
  return table;
}

bool is_irreducible(const Generator& k) {
  const auto fwd = reach(k, false);
  const auto bwd = reach(k, true);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

namespace {

using SparseD = Eigen::SparseMatrix<double>;

struct PinnedSolve {
  std::optional<std::vector<double>> accepted;
  Eigen::VectorXd rough;  // first iterate, used to choose a better pivot
};

// Stationary vector with state `pivot` pinned to one: K_rr p_r = -K_r,pivot.
// K_rr is a non-singular M-matrix for irreducible chains.
PinnedSolve solve_pinned(const SparseD& k, Eigen::Index pivot, bool full_cascade) {
  const Eigen::Index n = k.rows();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm(n);
  perm.setIdentity();
  std::swap(perm.indices()[0], perm.indices()[pivot]);
  const SparseD rows = perm * k;
  const SparseD full = rows * perm.transpose();
  const SparseD krr = full.bottomRightCorner(n - 1, n - 1);
  const Eigen::VectorXd rhs = -Eigen::VectorXd(full.col(0)).tail(n - 1);
  const double scale = full.diagonal().cwiseAbs().maxCoeff();

  PinnedSolve result;
  auto accept = [&](const Eigen::VectorXd& pr) {
    if (!pr.allFinite()) return false;
    Eigen::VectorXd p(n);
    p[0] = 1.0;
    p.tail(n - 1) = pr.cwiseMax(0.0);
    gauss_seidel_polish(full, p);
    if (!(p.sum() > 0.0) || !p.allFinite()) return false;
    p /= p.sum();
    if ((full * p).lpNorm<1>() > kResidualTolerance * scale) return false;
    result.accepted = normalized(perm.inverse() * p);
    return true;
  };

  {
    Eigen::BiCGSTAB<SparseD, Eigen::DiagonalPreconditioner<double>> solver;
    solver.setTolerance(1e-14);
    solver.setMaxIterations(std::max<Eigen::Index>(1000, 4 * n));
    solver.compute(krr);
    if (solver.info() == Eigen::Success) {
      const Eigen::VectorXd pr = solver.solve(rhs);
      result.rough = Eigen::VectorXd::Zero(n);
      result.rough[0] = 1.0;
      result.rough.tail(n - 1) = pr;
      result.rough = perm.inverse() * result.rough;
      if (accept(pr) || !full_cascade) return result;
    }
  }
  if (static_cast<std::size_t>(n) <= kDirectSolveLimit) {
    Eigen::SparseLU<SparseD, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(krr);
    if (lu.info() == Eigen::Success && accept(lu.solve(rhs))) return result;
  }
  Eigen::BiCGSTAB<SparseD, Eigen::IncompleteLUT<double>> solver;
  solver.preconditioner().setDroptol(1e-4);
  solver.preconditioner().setFillfactor(10);
  solver.setTolerance(1e-14);
  solver.compute(krr);
  if (solver.info() == Eigen::Success) accept(solver.solve(rhs));
  return result;
}

// K with one balance row replaced by the normalization row. Needs no pinned
// state, so it copes with states of vanishing stationary mass.
std::optional<Eigen::VectorXd> solve_bordered(const SparseD& k) {
  const Eigen::Index n = k.rows();
  const Eigen::Index row = n - 1;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(k.nonZeros() + n));
  for (Eigen::Index j = 0; j < k.outerSize(); ++j)
    for (SparseD::InnerIterator it(k, j); it; ++it)
      if (it.row() != row) entries.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index j = 0; j < n; ++j) entries.emplace_back(row, j, 1.0);
  SparseD a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<SparseD, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[row] = 1.0;
  Eigen::VectorXd p = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !p.allFinite()) return std::nullopt;
  return p;
}

}  // namespace

std::vector<double> stationary_vector(const Generator& k) {
  const Eigen::Index n = k.rows();
  if (n == 1) return {1.0};
  const SparseD full = k.cast<double>();
  const double scale = full.diagonal().cwiseAbs().maxCoeff();
  Eigen::VectorXd guess;
  if (static_cast<std::size_t>(n) <= kDirectSolveLimit) {
    if (auto p = solve_bordered(full)) {
      guess = p->cwiseMax(0.0);
      if (guess.sum() > 0.0) {
        guess /= guess.sum();
        if ((full * guess).lpNorm<1>() <= kResidualTolerance * scale) return normalized(guess);
      }
    }
  }
  // Pinning a state of negligible mass makes the system badly scaled, so a
  // rejected attempt is retried pinned at the most probable state of the best
  // estimate available.
  PinnedSolve first = solve_pinned(full, 0, true);
  if (first.accepted) return *first.accepted;
  if (guess.size() != n || !(guess.sum() > 0.0)) guess = first.rough;
  Eigen::Index pivot = 0;
  if (guess.size() == n && guess.allFinite()) guess.maxCoeff(&pivot);
  if (pivot != 0) {
    PinnedSolve second = solve_pinned(full, pivot, true);
    if (second.accepted) return *second.accepted;
  }
  throw NonConvergence(fmt::format("stationary solve on {} states did not converge", n));
}

DistributionTable cme_steady_state(const Crn& crn, const PopulationVector& x0, std::size_t cap) {
  DistributionTable table;
  table.space = reachable_states(crn, x0, cap);
  const Generator k = generator(crn, table.space);
  if (!is_irreducible(k))
    throw Reducible(fmt::format("reachable class of {} states is not irreducible", table.space.size()));
  table.probs = stationary_vector(k);
  return table;
}

PruneResult fsp_prune(const StateSpace& space, const std::vector<double>& probs, double threshold) {
  if (threshold < 0.0 || threshold >= 1.0) throw RangeError("prune threshold must lie in [0, 1)");
  if (probs.size() != space.size()) throw DimensionMismatch("distribution length differs from state space size");
  std::vector<PopulationVector> kept;
  PruneResult out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (probs[i] < threshold) {
      out.pruned_mass += probs[i];
    } else {
      kept.push_back(space[i]);
      out.probs.push_back(probs[i]);
    }
  }
  out.space = StateSpace(std::move(kept));
  return out;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

PopulationVector ssa_sample(const Crn& crn, const PopulationVector& x0, double tau, Rng& rng) {
  if (tau < 0.0) throw RangeError("snapshot time must be non-negative");
  PopulationVector x = x0;
  std::vector<double> a(crn.num_reactions());
  double t = 0.0;
  while (true) {
    double total = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) total += a[l] = propensity(crn, x, l);
    if (total <= 0.0) break;
    t += -std::log1p(-uniform01(rng)) / total;
    if (t > tau) break;
    const double target = uniform01(rng) * total;
    double running = 0.0;
    std::size_t chosen = a.size() - 1;
    for (std::size_t l = 0; l < a.size(); ++l) {
      running += a[l];
      if (target < running && a[l] > 0.0) {
        chosen = l;
        break;
      }
    }
    while (a[chosen] <= 0.0) --chosen;
    x = apply_reaction(x, crn, chosen);
  }
  return x;
}

PopulationVector ssa_sample(const Crn& crn, const PopulationVector& x0, double tau, std::uint64_t seed) {
  Rng rng(seed);
  return ssa_sample(crn, x0, tau, rng);
}

}  // namespace crnpriv
