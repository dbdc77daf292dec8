#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crnpriv/deterministic.hpp"
#include "crnpriv/error.hpp"
#include "crnpriv/structure.hpp"
#include "support.hpp"

using namespace crnpriv;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

/// Pair count of the two-step assembly at (n, n, m) by bisection on
/// (n - z - w(z))^2 = z with w(z) = m z / (1 + z).
double assembly_pair(double n, double m) {
  auto free1 = [&](double z) { return n - z - m * z / (1 + z); };
  // free1 decreases in z; bracket by its zero first
  double lo = 0.0, hi = n;
  for (int i = 0; i < 200; ++i) {
    const double z = 0.5 * (lo + hi);
    (free1(z) > 0 ? lo : hi) = z;
  }
  lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double z = 0.5 * (lo + hi);
    const double f = free1(z) * free1(z) - z;
    (f > 0 ? lo : hi) = z;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("vector field of the two-robot model") {
  const auto m = testing::model("motivational");
  const auto f = ode_rhs(m.crn, vec({2, 1, 2, 0, 0}));
  const auto expected = vec({-12, -2, -14, 12, 2});
  CHECK((f - expected).norm() < 1e-12);
}

TEST_CASE("both assemblies of the vector field agree") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.0, 4.0);
  for (const char* name : {"motivational", "fig5", "case_study_1", "case_study_2"}) {
    const auto m = testing::model(name);
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(m.crn.num_states()));
      for (auto& v : x) v = d(rng);
      const auto a = ode_rhs(m.crn, x);
      const auto b = ode_rhs_complex_form(m.crn, x);
      CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-10 * (1 + a.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST_CASE("jacobian matches finite differences") {
  const auto m = testing::model("case_study_2");
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m.crn.num_states()), 0.5, 3.0);
  const auto j = ode_jacobian(m.crn, x);
  const double h = 1e-6;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    const Eigen::VectorXd fd = (ode_rhs(m.crn, xp) - ode_rhs(m.crn, xm)) / (2 * h);
    CHECK((fd - j.col(c)).norm() < 1e-6);
  }
}

TEST_CASE("symmetric isomerization splits evenly") {
  const Crn ab({"a", "b"}, {}, {{{1, 0}, {0, 1}, 1.0}, {{0, 1}, {1, 0}, 1.0}});
  const auto x = steady_state(ab, vec({10, 0}));
  CHECK(x[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("two-step assembly equilibrium is the positive root") {
  const auto m = testing::model("case_study_1");
  const auto x = steady_state(m.crn, vec({220, 220, 200, 0, 0}));
  const double z = assembly_pair(220, 200);
  CHECK(x[3] == doctest::Approx(z).epsilon(1e-9));
  CHECK(x[3] == doctest::Approx(23.3718).epsilon(1e-5));
  CHECK((x.array() > 0).all());
  CHECK(ode_rhs(m.crn, x).lpNorm<Eigen::Infinity>() < 1e-8);
  // conservation against x0
  CHECK(x[0] + x[3] + x[4] == doctest::Approx(220).epsilon(1e-12));
  CHECK(x[2] + x[4] == doctest::Approx(200).epsilon(1e-12));
}

TEST_CASE("two-robot equilibrium agrees with long-horizon integration") {
  const auto m = testing::model("motivational");
  const auto x0 = vec({2, 1, 2, 0, 0});
  const auto x = steady_state(m.crn, x0);
  const auto ref = testing::oracle::rk4(m.crn, x0, 1e3, 1e-3);
  CHECK((x - ref).lpNorm<Eigen::Infinity>() < 1e-9);
  const auto dp = integrate_ode(m.crn, x0, 1e3);
  CHECK((x - dp).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("exchangeable types give mirrored equilibria") {
  const auto m = testing::model("case_study_1");
  const auto a = steady_state(m.crn, vec({230, 210, 200, 0, 0}));
  const auto b = steady_state(m.crn, vec({210, 230, 200, 0, 0}));
  CHECK(a[0] == doctest::Approx(b[1]).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(b[0]).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(b[3]).epsilon(1e-12));
}

TEST_CASE("unreachable states stay at zero") {
  const auto m = testing::model("case_study_1");
  const auto x = steady_state(m.crn, vec({5, 4, 0, 0, 0}));
  CHECK(x[2] == 0.0);
  CHECK(x[4] == 0.0);
  CHECK(x[3] > 0.0);
  const auto none = steady_state(m.crn, vec({0, 0, 0, 0, 0}));
  CHECK(none.isZero());
}

TEST_CASE("non complex-balanced network is refused") {
  const auto m = testing::model("case_study_2");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(9);
  x0.head(3).setConstant(10);
  CHECK_THROWS_AS(steady_state(m.crn, x0), NotComplexBalanced);
}

TEST_CASE("property: steady state is an equilibrium in the class of x0 for every tree shape") {
  for (const auto& t : enumerate_binary_trees(6)) {
    const auto tm = tree_to_crn(t);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tm.crn.num_states()));
    for (std::size_t k = 0; k < tm.crn.num_types(); ++k) x0[static_cast<Eigen::Index>(*tm.crn.types()[k].initial_state)] = 3;
    const auto x = steady_state(tm.crn, x0);
    CHECK(ode_rhs(tm.crn, x).lpNorm<Eigen::Infinity>() < 1e-8);
    for (const auto& c : conservation_laws(tm.crn)) {
      double a = 0, b = 0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        a += static_cast<double>(c[i]) * x[static_cast<Eigen::Index>(i)];
        b += static_cast<double>(c[i]) * x0[static_cast<Eigen::Index>(i)];
      }
      CHECK(a == doctest::Approx(b).epsilon(1e-10));
    }
  }
}
