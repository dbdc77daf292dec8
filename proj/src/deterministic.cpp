#include "crnpriv/deterministic.hpp"

#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "crnpriv/error.hpp"
#include "crnpriv/structure.hpp"

namespace crnpriv {
namespace {

double monomial(const Complex& rho, const MeanState& x) {
  double v = 1.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] != 0) v *= std::pow(x[static_cast<Eigen::Index>(i)], rho[i]);
  }
  return v;
}

struct Conservation {
  Eigen::MatrixXd basis;  // m x N_A
  Eigen::VectorXd totals;
};

Conservation conservation_of(const Crn& crn, const MeanState& x0) {
  const auto laws = conservation_laws(crn);
  Conservation c;
  c.basis.resize(static_cast<Eigen::Index>(laws.size()), static_cast<Eigen::Index>(crn.num_states()));
  for (std::size_t k = 0; k < laws.size(); ++k)
    for (std::size_t i = 0; i < crn.num_states(); ++i)
      c.basis(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = static_cast<double>(laws[k][i]);
  c.totals = c.basis * x0;
  return c;
}

Eigen::VectorXd residual(const Crn& crn, const Conservation& cons, const MeanState& x) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = cons.basis.rows();
  Eigen::VectorXd r(n + m);
  r.head(n) = ode_rhs(crn, x);
  r.tail(m) = cons.basis * x - cons.totals;
  return r;
}

// States that can ever become occupied starting from the support of x0:
// products of reactions whose reactants are all available. The rest stay 0.
std::vector<bool> active_states(const Crn& crn, const MeanState& x0) {
  std::vector<bool> active(crn.num_states());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = x0[static_cast<Eigen::Index>(i)] > 0.0;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      const Complex& rho = crn.reactants(l);
      bool fires = true;
      for (std::size_t i = 0; i < rho.size() && fires; ++i) fires = rho[i] == 0 || active[i];
      if (!fires) continue;
      const Complex& out = crn.products(l);
      for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] != 0 && !active[i]) active[i] = grew = true;
    }
  }
  return active;
}

bool positive_on(const MeanState& x, const std::vector<bool>& active) {
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i] && !(x[static_cast<Eigen::Index>(i)] > 0.0)) return false;
  return true;
}

bool converged(const Crn& crn, const Conservation& cons, const std::vector<bool>& active, const MeanState& x,
               double tol) {
  if (!positive_on(x, active) || !x.allFinite()) return false;
  const double scale = cons.totals.size() ? std::max(1.0, cons.totals.cwiseAbs().maxCoeff()) : 1.0;
  const double field = ode_rhs(crn, x).cwiseAbs().maxCoeff();
  const double drift = cons.basis.rows() ? (cons.basis * x - cons.totals).cwiseAbs().maxCoeff() : 0.0;
  return field < tol && drift < tol * scale;
}

// Damped Gauss-Newton on [f(x); C x - b] = 0. Steps are halved until the
// iterate stays positive and the residual norm decreases.
bool newton(const Crn& crn, const Conservation& cons, const std::vector<bool>& active, MeanState& x,
            const SteadyStateOptions& opts) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = cons.basis.rows();
  std::vector<Eigen::Index> cols;
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i]) cols.push_back(static_cast<Eigen::Index>(i));
  const auto na = static_cast<Eigen::Index>(cols.size());
  if (na == 0) return true;  // nothing can be populated
  Eigen::VectorXd r = residual(crn, cons, x);
  double norm = r.norm();
  int polish = 0;
  for (int it = 0; it < opts.max_newton_iterations; ++it) {
    if (converged(crn, cons, active, x, opts.tol)) {
      // A couple of extra full steps drive the iterate to machine precision.
      if (++polish > 3) return true;
    }
    Eigen::MatrixXd full(n + m, n);
    full.topRows(n) = ode_jacobian(crn, x);
    full.bottomRows(m) = cons.basis;
    Eigen::MatrixXd jac(n + m, na);
    for (Eigen::Index k = 0; k < na; ++k) jac.col(k) = full.col(cols[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd reduced = jac.colPivHouseholderQr().solve(-r);
    if (!reduced.allFinite()) return false;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < na; ++k) step[cols[static_cast<std::size_t>(k)]] = reduced[k];
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, lambda *= 0.5) {
      const MeanState trial = x + lambda * step;
      if (!positive_on(trial, active)) continue;
      const Eigen::VectorXd rt = residual(crn, cons, trial);
      const double nt = rt.norm();
      if (nt < norm || (polish > 0 && nt <= norm)) {
        x = trial;
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) return polish > 0 || converged(crn, cons, active, x, opts.tol);
  }
  return converged(crn, cons, active, x, opts.tol);
}

}  // namespace

Eigen::VectorXd ode_rhs(const Crn& crn, const MeanState& x) {
  if (static_cast<std::size_t>(x.size()) != crn.num_states()) throw DimensionMismatch("mean state length differs from the number of states");
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(x.size());
  for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
    const double flux = crn.reactions()[l].rate * monomial(crn.reactants(l), x);
    for (std::size_t i = 0; i < crn.num_states(); ++i) dx[static_cast<Eigen::Index>(i)] += flux * crn.changes()[l][i];
  }
  return dx;
}

Eigen::MatrixXd complex_matrix(const Crn& crn) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(crn.num_states()), static_cast<Eigen::Index>(crn.num_complexes()));
  for (std::size_t j = 0; j < crn.num_complexes(); ++j)
    for (std::size_t i = 0; i < crn.num_states(); ++i)
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = crn.complexes()[j][i];
  return y;
}

Eigen::MatrixXd kinetics_matrix(const Crn& crn) {
  // Column j holds the outflow of complex j: -sum of its rates on the
  // diagonal, each rate at its target row.
  const auto nc = static_cast<Eigen::Index>(crn.num_complexes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc, nc);
  for (const auto& r : crn.reactions()) {
    a(static_cast<Eigen::Index>(r.target), static_cast<Eigen::Index>(r.source)) += r.rate;
    a(static_cast<Eigen::Index>(r.source), static_cast<Eigen::Index>(r.source)) -= r.rate;
  }
  return a;
}

Eigen::VectorXd complex_monomials(const Crn& crn, const MeanState& x) {
  Eigen::VectorXd psi(static_cast<Eigen::Index>(crn.num_complexes()));
  for (std::size_t j = 0; j < crn.num_complexes(); ++j) psi[static_cast<Eigen::Index>(j)] = monomial(crn.complexes()[j], x);
  return psi;
}

Eigen::VectorXd ode_rhs_complex_form(const Crn& crn, const MeanState& x) {
  return complex_matrix(crn) * (kinetics_matrix(crn) * complex_monomials(crn, x));
}

Eigen::MatrixXd ode_jacobian(const Crn& crn, const MeanState& x) {
  const auto n = static_cast<Eigen::Index>(crn.num_states());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
    const Complex& rho = crn.reactants(l);
    const double k = crn.reactions()[l].rate;
    for (std::size_t j = 0; j < rho.size(); ++j) {
      if (rho[j] == 0) continue;
      // d/dx_j of k * prod_i x_i^rho_i
      double d = k * rho[j] * std::pow(x[static_cast<Eigen::Index>(j)], rho[j] - 1);
      for (std::size_t i = 0; i < rho.size(); ++i) {
        if (i != j && rho[i] != 0) d *= std::pow(x[static_cast<Eigen::Index>(i)], rho[i]);
      }
      for (std::size_t i = 0; i < crn.num_states(); ++i) {
        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += d * crn.changes()[l][i];
      }
    }
  }
  return jac;
}

MeanState integrate_ode(const Crn& crn, const MeanState& x0, double horizon, double abs_tol, double rel_tol) {
  using State = std::vector<double>;
  namespace odeint = boost::numeric::odeint;
  State state(x0.data(), x0.data() + x0.size());
  auto system = [&crn](const State& s, State& ds, double) {
    const Eigen::Map<const Eigen::VectorXd> xs(s.data(), static_cast<Eigen::Index>(s.size()));
    const Eigen::VectorXd f = ode_rhs(crn, xs);
    ds.assign(f.data(), f.data() + f.size());
  };
  auto stepper = odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, system, state, 0.0, horizon, 1e-3);
  return Eigen::Map<const Eigen::VectorXd>(state.data(), static_cast<Eigen::Index>(state.size()));
}

MeanState steady_state(const Crn& crn, const MeanState& x0, const SteadyStateOptions& opts) {
  if (static_cast<std::size_t>(x0.size()) != crn.num_states()) throw DimensionMismatch("mean state length differs from the number of states");
  if ((x0.array() < 0.0).any()) throw InputError("initial mean state must be non-negative");
  const auto d = deficiency(crn);
  if (!is_weakly_reversible(crn) || d.deficiency != 0)
    throw NotComplexBalanced(fmt::format("network is not certified complex-balanced (weakly reversible: {}, deficiency: {})",
                                         is_weakly_reversible(crn), d.deficiency));

  // Unreachable states (e.g. those of a type with no agents) are pinned at 0
  // and the equilibrium is sought on the remaining face.
  const Conservation cons = conservation_of(crn, x0);
  const auto active = active_states(crn, x0);
  auto seeded = [&] {
    MeanState x = x0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      auto& v = x[static_cast<Eigen::Index>(i)];
      v = active[i] ? (v > 0.0 ? v : 1e-6) : 0.0;
    }
    return x;
  };
  MeanState x = seeded();
  if (newton(crn, cons, active, x, opts)) return x;

  // Fallback: relax along the flow, then polish with Newton.
  MeanState y = seeded();
  double elapsed = 0.0;
  for (double chunk = 1.0; elapsed < opts.integration_horizon; chunk *= 2.0) {
    y = integrate_ode(crn, y, chunk);
    elapsed += chunk;
    for (std::size_t i = 0; i < active.size(); ++i) {
      auto& v = y[static_cast<Eigen::Index>(i)];
      v = active[i] ? std::max(v, 1e-300) : 0.0;
    }
    MeanState trial = y;
    if (newton(crn, cons, active, trial, opts)) return trial;
  }
  throw NonConvergence("steady-state solver did not reach the requested tolerance");
}

}  // namespace crnpriv
