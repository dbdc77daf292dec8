#pragma once

// Shared fixtures and independent reference computations for the tests.
// Nothing here calls into the library's numerical code: chains are
// enumerated, assembled and solved densely from the reaction lists.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "crnpriv/crn.hpp"
#include "crnpriv/spec_parser.hpp"

namespace testing {

inline std::string model_path(const std::string& name) { return std::string(CRNPRIV_MODELS_DIR) + "/" + name; }

inline crnpriv::ModelFile model(const std::string& name) { return crnpriv::load_spec(model_path(name + ".model")); }

/// Copy of a model with replaced per-type counts.
inline crnpriv::ModelFile with_counts(crnpriv::ModelFile m, const std::vector<std::int64_t>& counts) {
  m.composition.per_type = counts;
  return m;
}

inline crnpriv::PopulationVector pv(std::vector<crnpriv::Count> v) { return crnpriv::PopulationVector(std::move(v)); }

namespace oracle {

using State = std::vector<long>;

struct DenseChain {
  std::vector<State> states;
  Eigen::MatrixXd k;  // k(i, j) = rate j -> i
};

inline double mass_action(const crnpriv::Crn& crn, std::size_t l, const State& x) {
  double r = crn.reactions()[l].rate;
  const auto& rho = crn.reactants(l);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (x[i] < rho[i]) return 0.0;
    for (int m = 0; m < rho[i]; ++m) r *= static_cast<double>(x[i]);
  }
  return r;
}

/// Breadth-first closure with std::map bookkeeping and a dense generator.
inline DenseChain dense_chain(const crnpriv::Crn& crn, const State& x0) {
  DenseChain c;
  std::map<State, std::size_t> index{{x0, 0}};
  c.states.push_back(x0);
  for (std::size_t h = 0; h < c.states.size(); ++h) {
    const State x = c.states[h];
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      if (mass_action(crn, l, x) <= 0.0) continue;
      State y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += crn.products(l)[i] - crn.reactants(l)[i];
      if (index.emplace(y, c.states.size()).second) c.states.push_back(y);
    }
  }
  const auto n = static_cast<Eigen::Index>(c.states.size());
  c.k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const State& x = c.states[static_cast<std::size_t>(j)];
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      const double r = mass_action(crn, l, x);
      if (r <= 0.0) continue;
      State y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += crn.products(l)[i] - crn.reactants(l)[i];
      c.k(static_cast<Eigen::Index>(index.at(y)), j) += r;
      c.k(j, j) -= r;
    }
  }
  return c;
}

/// Normalized kernel vector of a dense generator.
inline Eigen::VectorXd dense_stationary(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd a = k;
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;
  return a.fullPivLu().solve(b);
}

inline Eigen::VectorXd dense_transient(const Eigen::MatrixXd& k, double tau) {
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(k.rows());
  p0[0] = 1.0;
  const Eigen::MatrixXd e = (k * tau).exp();
  return e * p0;
}

inline State to_state(const crnpriv::PopulationVector& x) { return State(x.counts().begin(), x.counts().end()); }

/// Observable pushforward keyed by the observation vector.
inline std::map<std::vector<long>, double> observe(const DenseChain& c, const Eigen::VectorXd& p,
                                                   const std::vector<std::vector<std::size_t>>& groups) {
  std::map<std::vector<long>, double> out;
  for (std::size_t s = 0; s < c.states.size(); ++s) {
    std::vector<long> y;
    for (const auto& g : groups) {
      long v = 0;
      for (auto i : g) v += c.states[s][i];
      y.push_back(v);
    }
    out[y] += p[static_cast<Eigen::Index>(s)];
  }
  return out;
}

inline double poisson_pmf(double mean, long k) {
  double p = std::exp(-mean);
  for (long i = 1; i <= k; ++i) p *= mean / static_cast<double>(i);
  return p;
}

/// a(n) = sum_{i < n-i} a(i) a(n-i) + [n even] C(a(n/2) + 1, 2).
inline std::vector<std::uint64_t> wedderburn_etherington_table(int n_max) {
  std::vector<std::uint64_t> a(static_cast<std::size_t>(n_max) + 1, 0);
  if (n_max >= 1) a[1] = 1;
  for (int n = 2; n <= n_max; ++n) {
    std::uint64_t v = 0;
    for (int i = 1; 2 * i < n; ++i) v += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(n - i)];
    if (n % 2 == 0) {
      const std::uint64_t h = a[static_cast<std::size_t>(n / 2)];
      v += h * (h + 1) / 2;
    }
    a[static_cast<std::size_t>(n)] = v;
  }
  return a;
}

/// Classical fixed-step RK4 on the mass-action vector field.
inline Eigen::VectorXd rk4(const crnpriv::Crn& crn, Eigen::VectorXd x, double horizon, double dt) {
  auto f = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(s.size());
    for (std::size_t l = 0; l < crn.num_reactions(); ++l) {
      double r = crn.reactions()[l].rate;
      const auto& rho = crn.reactants(l);
      for (std::size_t i = 0; i < rho.size(); ++i) r *= std::pow(s[static_cast<Eigen::Index>(i)], rho[i]);
      for (std::size_t i = 0; i < rho.size(); ++i)
        d[static_cast<Eigen::Index>(i)] += r * (crn.products(l)[i] - rho[i]);
    }
    return d;
  };
  const long steps = static_cast<long>(std::ceil(horizon / dt));
  for (long s = 0; s < steps; ++s) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

inline double total_variation(const std::map<std::vector<long>, double>& a, const std::map<std::vector<long>, double>& b) {
  double tv = 0.0;
  for (const auto& [y, p] : a) {
    auto it = b.find(y);
    tv += std::abs(p - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [y, q] : b)
    if (!a.count(y)) tv += std::abs(q);
  return 0.5 * tv;
}

}  // namespace oracle
}  // namespace testing
