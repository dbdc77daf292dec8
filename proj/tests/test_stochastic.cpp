#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "crnpriv/error.hpp"
#include "crnpriv/stochastic.hpp"
#include "crnpriv/structure.hpp"
#include "support.hpp"

using namespace crnpriv;
using testing::pv;
namespace oracle = testing::oracle;

namespace {

using Law = std::map<oracle::State, double>;

Law as_law(const DistributionTable& t) {
  Law out;
  for (std::size_t i = 0; i < t.space.size(); ++i) out[oracle::to_state(t.space[i])] += t.probs[i];
  return out;
}

Law as_law(const oracle::DenseChain& c, const Eigen::VectorXd& p) {
  Law out;
  for (std::size_t i = 0; i < c.states.size(); ++i) out[c.states[i]] += p[static_cast<Eigen::Index>(i)];
  return out;
}

double tv(const Law& a, const Law& b) { return oracle::total_variation(a, b); }

const Crn kIso({"a", "b"}, {}, {{{1, 0}, {0, 1}, 1.0}, {{0, 1}, {1, 0}, 1.0}});
const Crn kDecay({"a", "b"}, {}, {{{1, 0}, {0, 1}, 1.0}});

PopulationVector x0_of(const ModelFile& m) {
  std::vector<Count> v(m.crn.num_states(), 0);
  for (std::size_t t = 0; t < m.crn.num_types(); ++t) v[*m.crn.types()[t].initial_state] += static_cast<Count>(m.composition.per_type[t]);
  for (auto [s, c] : m.composition.resources) v[s] += static_cast<Count>(c);
  return pv(v);
}

/// Random reversible networks on three states with integer rates.
Crn random_network(std::mt19937& rng) {
  std::uniform_int_distribution<int> coef(0, 2), rate(1, 4);
  std::vector<ReactionInput> rs;
  while (rs.size() < 4) {
    Complex a{coef(rng), coef(rng), coef(rng)}, b{coef(rng), coef(rng), coef(rng)};
    int sa = a[0] + a[1] + a[2], sb = b[0] + b[1] + b[2];
    if (a == b || sa != sb || sa == 0) continue;  // mass-preserving keeps the chain finite
    rs.push_back({a, b, static_cast<double>(rate(rng))});
    rs.push_back({b, a, static_cast<double>(rate(rng))});
  }
  return Crn({"x", "y", "z"}, {}, rs);
}

}  // namespace

TEST_CASE("reachable sets") {
  const auto m = testing::model("motivational");
  CHECK(reachable_states(m.crn, pv({2, 1, 2, 0, 0})).size() == 5);
  CHECK(reachable_states(m.crn, pv({1, 2, 2, 0, 0})).size() == 5);
  const auto s = reachable_states(kIso, pv({2, 0}));
  CHECK(s.size() == 3);
  CHECK(s.contains(pv({1, 1})));
  CHECK(s.contains(pv({0, 2})));
  CHECK(s[0] == pv({2, 0}));
}

TEST_CASE("explosion guard") {
  const Crn birth({"x"}, {}, {{{0}, {1}, 1.0}});
  CHECK_THROWS_AS(reachable_states(birth, pv({0}), 100), ExplosionGuard);
  try {
    reachable_states(birth, pv({0}), 50);
  } catch (const ExplosionGuard& e) {
    CHECK(e.cap() == 50);
  }
}

TEST_CASE("generator entries") {
  const auto space = reachable_states(kDecay, pv({1, 0}));
  const auto k = Eigen::MatrixXd(generator(kDecay, space));
  CHECK(k(1, 0) == 1.0);
  CHECK(k(0, 0) == -1.0);
  CHECK(k.col(1).isZero());

  const auto m = testing::model("motivational");
  const auto ms = reachable_states(m.crn, pv({2, 1, 2, 0, 0}));
  const auto mk = Eigen::MatrixXd(generator(m.crn, ms));
  const auto to = *ms.find(pv({1, 1, 1, 1, 0}));
  CHECK(mk(static_cast<Eigen::Index>(to), 0) == 4.0 * 3.0);
}

TEST_CASE("property: generator columns sum to exactly zero on integer rates") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Crn crn = random_network(rng);
    const auto space = reachable_states(crn, pv({3, 2, 1}));
    const Generator k = generator(crn, space);
    for (Eigen::Index j = 0; j < k.outerSize(); ++j) {
      double s = 0.0;
      for (Generator::InnerIterator it(k, j); it; ++it) s += it.value();
      CHECK(s == 0.0);
    }
  }
  for (const char* name : {"motivational", "case_study_1", "case_study_2"}) {
    auto m = testing::model(name);
    if (std::string(name) == "case_study_1") m.composition.per_type = {4, 4, 3};
    if (std::string(name) == "case_study_2") m.composition.per_type = {3, 3, 3};
    const auto space = reachable_states(m.crn, x0_of(m));
    const Generator k = generator(m.crn, space);
    for (Eigen::Index j = 0; j < k.outerSize(); ++j) {
      double s = 0.0;
      for (Generator::InnerIterator it(k, j); it; ++it) s += it.value();
      CHECK(s == 0.0);
    }
  }
}

TEST_CASE("exponential decay and zero time") {
  const auto t = cme_solve(kDecay, pv({1, 0}), 1.0);
  const auto law = as_law(t);
  CHECK(std::abs(law.at({1, 0}) - std::exp(-1.0)) < 1e-9);
  CHECK(std::abs(law.at({0, 1}) - (1 - std::exp(-1.0))) < 1e-9);
  const auto z = cme_solve(kDecay, pv({1, 0}), 0.0);
  CHECK(as_law(z).at({1, 0}) == 1.0);
  CHECK_THROWS_AS(cme_solve(kDecay, pv({1, 0}), -1.0), RangeError);
}

TEST_CASE("transient solution matches the dense matrix exponential") {
  for (double tau : {0.3, 2.0, 15.0}) {
    const auto m = testing::model("motivational");
    const auto t = cme_solve(m.crn, pv({2, 1, 2, 0, 0}), tau);
    const auto c = oracle::dense_chain(m.crn, {2, 1, 2, 0, 0});
    CHECK(tv(as_law(t), as_law(c, oracle::dense_transient(c.k, tau))) < 1e-9);
  }
  const auto cs1 = testing::model("case_study_1");
  const auto t = cme_solve(cs1.crn, pv({3, 3, 2, 0, 0}), 1.5);
  const auto c = oracle::dense_chain(cs1.crn, {3, 3, 2, 0, 0});
  CHECK(tv(as_law(t), as_law(c, oracle::dense_transient(c.k, 1.5))) < 1e-9);
}

TEST_CASE("stationary solutions match the dense null space") {
  const auto iso = cme_steady_state(kIso, pv({1, 0}));
  CHECK(as_law(iso).at({1, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(as_law(iso).at({0, 1}) == doctest::Approx(0.5).epsilon(1e-12));

  const auto m = testing::model("motivational");
  for (const oracle::State& x0 : {oracle::State{2, 1, 2, 0, 0}, oracle::State{1, 2, 2, 0, 0}}) {
    const auto s = cme_steady_state(m.crn, pv({static_cast<Count>(x0[0]), static_cast<Count>(x0[1]), 2, 0, 0}));
    CHECK(!s.time.has_value());
    const auto c = oracle::dense_chain(m.crn, x0);
    CHECK(tv(as_law(s), as_law(c, oracle::dense_stationary(c.k))) < 1e-12);
  }
  auto cs2 = testing::model("case_study_2");
  const auto s = cme_steady_state(cs2.crn, pv({2, 2, 1, 0, 0, 0, 0, 0, 0}));
  const auto c = oracle::dense_chain(cs2.crn, {2, 2, 1, 0, 0, 0, 0, 0, 0});
  CHECK(tv(as_law(s), as_law(c, oracle::dense_stationary(c.k))) < 1e-10);
}

TEST_CASE("long-horizon transient approaches the stationary law") {
  const auto m = testing::model("motivational");
  const auto s = cme_steady_state(m.crn, pv({2, 1, 2, 0, 0}));
  const auto t = cme_solve(m.crn, pv({2, 1, 2, 0, 0}), 50.0);
  const Generator k = generator(m.crn, t.space);
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(t.probs.data(), static_cast<Eigen::Index>(t.probs.size()));
  REQUIRE((k * p).lpNorm<1>() < 1e-10);
  CHECK(tv(as_law(s), as_law(t)) < 1e-6);
}

TEST_CASE("property: semigroup law on random small networks") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Crn crn = random_network(rng);
    const auto x0 = pv({3, 2, 1});
    const auto whole = cme_solve(crn, x0, 0.7);
    const auto first = cme_solve(crn, x0, 0.3);
    const Generator k = generator(crn, first.space);
    const auto second = uniformization(k, first.probs, 0.4, 1e-12);
    DistributionTable composed{first.space, second, 0.7, 0.0};
    CHECK(tv(as_law(whole), as_law(composed)) < 1e-9);
  }
}

TEST_CASE("property: mass is conserved without projection") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Crn crn = random_network(rng);
    for (double tau : {0.1, 1.0, 10.0}) {
      const auto t = cme_solve(crn, pv({4, 1, 2}), tau);
      CHECK(std::abs(1.0 - t.total()) < 1e-9);
      CHECK(t.pruned_mass == 0.0);
      for (double p : t.probs) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("property: projected solutions lose no more than the reported bound") {
  const Crn bd({"x"}, {}, {{{0}, {1}, 5.0}, {{1}, {0}, 1.0}});
  for (double threshold : {1e-12, 1e-8, 1e-5}) {
    CmeOptions o;
    o.fsp_threshold = threshold;
    const auto t = cme_solve(bd, pv({0}), 4.0, o);
    CHECK(1.0 - t.total() <= t.pruned_mass + 1e-15);
    // Poisson(5 (1 - e^-4)) is the exact law
    const double mean = 5.0 * (1 - std::exp(-4.0));
    double err = 0.0;
    for (std::size_t i = 0; i < t.space.size(); ++i)
      err += std::abs(t.probs[i] - oracle::poisson_pmf(mean, t.space[i][0]));
    CHECK(err < 1e-6 + 10 * t.pruned_mass);
  }
}

TEST_CASE("reducible chains are rejected") {
  CHECK_THROWS_AS(cme_steady_state(kDecay, pv({1, 0})), Reducible);
  const auto space = reachable_states(kDecay, pv({1, 0}));
  CHECK_FALSE(is_irreducible(generator(kDecay, space)));
  const auto iso = reachable_states(kIso, pv({3, 0}));
  CHECK(is_irreducible(generator(kIso, iso)));
}

TEST_CASE("pruning") {
  const auto m = testing::model("motivational");
  const auto s = cme_steady_state(m.crn, pv({2, 1, 2, 0, 0}));
  const auto same = fsp_prune(s.space, s.probs, 0.0);
  CHECK(same.space.size() == s.space.size());
  CHECK(same.pruned_mass == 0.0);
  CHECK(fsp_prune(s.space, s.probs, 1e-12).space.size() == 5);

  const auto point = cme_solve(m.crn, pv({2, 1, 2, 0, 0}), 0.0);
  const auto kept = fsp_prune(point.space, point.probs, 0.5);
  CHECK(kept.space.size() == 1);
  CHECK(kept.pruned_mass == 0.0);
  CHECK_THROWS_AS(fsp_prune(s.space, s.probs, 1.0), RangeError);
  CHECK_THROWS_AS(fsp_prune(s.space, s.probs, -0.1), RangeError);
}

TEST_CASE("sampler basics") {
  CHECK(ssa_sample(kDecay, pv({1, 0}), 0.0, 5) == pv({1, 0}));
  CHECK(ssa_sample(kDecay, pv({1, 0}), 1.0, 99) == ssa_sample(kDecay, pv({1, 0}), 1.0, 99));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(replicate_seed(42, 0) == 42);
  CHECK(replicate_seed(42, 1) == 43);
}

TEST_CASE("sampled exponential clock") {
  const int runs = 100000;
  int fired = 0;
  for (int i = 0; i < runs; ++i)
    if (ssa_sample(kDecay, pv({1, 0}), 1.0, replicate_seed(2024, static_cast<std::uint64_t>(i)))[1] == 1) ++fired;
  CHECK(static_cast<double>(fired) / runs == doctest::Approx(1 - std::exp(-1.0)).epsilon(0.005 / 0.632));
}

TEST_CASE("sampled observable law agrees with the master equation") {
  const auto m = testing::model("motivational");
  const auto x0 = pv({2, 1, 2, 0, 0});
  const auto exact = as_law(cme_solve(m.crn, x0, 2.0));
  Law empirical;
  const int runs = 100000;
  for (int i = 0; i < runs; ++i) empirical[oracle::to_state(ssa_sample(m.crn, x0, 2.0, replicate_seed(7, static_cast<std::uint64_t>(i))))] += 1.0 / runs;
  CHECK(tv(exact, empirical) < 0.01);
}

TEST_CASE("property: sampled trajectories preserve conservation laws exactly") {
  for (const char* name : {"motivational", "case_study_1", "case_study_2", "fig5"}) {
    auto m = testing::model(name);
    if (std::string(name) == "case_study_1") m.composition.per_type = {30, 25, 20};
    const auto laws = conservation_laws(m.crn);
    const auto x0 = x0_of(m);
    auto value = [&](const PopulationVector& x) {
      std::vector<std::int64_t> out;
      for (const auto& c : laws) {
        std::int64_t s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += c[i] * x[i];
        out.push_back(s);
      }
      return out;
    };
    Rng rng(31);
    for (int run = 0; run < 200; ++run) {
      const auto x = ssa_sample(m.crn, x0, 0.05 * run, rng);
      for (auto c : x.counts()) CHECK(c >= 0);
      CHECK(value(x) == value(x0));
    }
  }
}
