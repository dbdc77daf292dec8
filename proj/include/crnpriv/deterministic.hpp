#pragma once

// Mean-field mass-action dynamics and positive steady states of
// complex-balanced networks.

#include <vector>

#include <Eigen/Dense>

#include "crnpriv/crn.hpp"

namespace crnpriv {

using MeanState = Eigen::VectorXd;

/// Gamma * r(x) with real-valued mass-action fluxes.
Eigen::VectorXd ode_rhs(const Crn& crn, const MeanState& x);

/// The same vector field assembled as M * A * psi(x) from the complex
/// composition matrix, the kinetics matrix and the complex monomials.
Eigen::VectorXd ode_rhs_complex_form(const Crn& crn, const MeanState& x);

Eigen::MatrixXd complex_matrix(const Crn& crn);   // N_A x N_C
Eigen::MatrixXd kinetics_matrix(const Crn& crn);  // N_C x N_C
Eigen::VectorXd complex_monomials(const Crn& crn, const MeanState& x);

/// Jacobian of ode_rhs.
Eigen::MatrixXd ode_jacobian(const Crn& crn, const MeanState& x);

struct SteadyStateOptions {
  double tol = 1e-10;        // infinity norm of the vector field
  int max_newton_iterations = 200;
  double integration_horizon = 1e6;
};

/// Unique positive equilibrium in the compatibility class of x0. States that
/// no reaction sequence can populate from the support of x0 are exactly 0.
/// Throws NotComplexBalanced unless the network is weakly reversible with
/// deficiency zero, NonConvergence if neither Newton nor integration reach tol.
MeanState steady_state(const Crn& crn, const MeanState& x0, const SteadyStateOptions& opts = {});

/// Forward integration of the vector field (adaptive Dormand-Prince).
MeanState integrate_ode(const Crn& crn, const MeanState& x0, double horizon, double abs_tol = 1e-12,
                        double rel_tol = 1e-10);

}  // namespace crnpriv
