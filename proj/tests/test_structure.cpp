#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "crnpriv/error.hpp"
#include "crnpriv/structure.hpp"
#include "support.hpp"

using namespace crnpriv;

TEST_CASE("fig5 network") {
  const auto m = testing::model("fig5");
  const auto r = analyze_structure(m.crn);
  CHECK(r.num_complexes == 8);
  CHECK(r.linkage_classes.size() == 4);
  CHECK(r.rank_gamma == 4);
  CHECK(r.deficiency == 0);
  CHECK(r.weakly_reversible);
  CHECK(r.complex_balanced_certified);
}

TEST_CASE("two-step assembly network") {
  const auto m = testing::model("case_study_1");
  const auto r = analyze_structure(m.crn);
  CHECK(r.num_complexes == 4);
  CHECK(r.linkage_classes.size() == 2);
  CHECK(r.rank_gamma == 2);
  CHECK(r.deficiency == 0);
  CHECK(r.weakly_reversible);
  CHECK(r.collaboration_dag);
  CHECK(r.complex_balanced_certified);
  for (const std::vector<std::int64_t>& c :
       {std::vector<std::int64_t>{1, 0, 0, 1, 1}, {0, 1, 0, 1, 1}, {0, 0, 1, 0, 1}})
    CHECK(in_span(r.conservation_basis, c));
  CHECK(r.conservation_basis.size() == 3);
  CHECK_FALSE(in_span(r.conservation_basis, {1, 0, 0, 0, 0}));
}

TEST_CASE("exploration network with one-way completions") {
  const auto m = testing::model("case_study_2");
  const auto r = analyze_structure(m.crn);
  CHECK_FALSE(r.weakly_reversible);
  CHECK_FALSE(r.collaboration_dag);
  CHECK_FALSE(r.complex_balanced_certified);
}

TEST_CASE("resource conservation in the two-robot model") {
  const auto m = testing::model("motivational");
  const auto basis = conservation_laws(m.crn);
  CHECK(in_span(basis, {0, 0, 1, 1, 1}));
  CHECK(in_span(basis, {1, 0, 0, 1, 0}));
  CHECK(in_span(basis, {0, 1, 0, 0, 1}));
  CHECK(basis.size() == 3);
  CHECK(is_collaboration_dag(m.crn));
}

TEST_CASE("small networks") {
  const Crn ab({"a", "b"}, {}, {{{1, 0}, {0, 1}, 1.0}, {{0, 1}, {1, 0}, 1.0}});
  CHECK(conservation_laws(ab) == std::vector<std::vector<std::int64_t>>{{1, 1}});
  CHECK(is_weakly_reversible(ab));
  CHECK(deficiency(ab).deficiency == 0);

  const Crn oneway({"a", "b"}, {}, {{{1, 0}, {0, 1}, 1.0}});
  CHECK_FALSE(is_weakly_reversible(oneway));

  const Crn empty({"a", "b"}, {}, {});
  CHECK(linkage_classes(empty).empty());
  CHECK(deficiency(empty).deficiency == 0);
  CHECK(deficiency(empty).rank == 0);
}

TEST_CASE("integer rank") {
  IntMatrix m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  CHECK(integer_rank(m) == 2);
  IntMatrix big(2, 2);
  big << 1000000007LL, 1000000009LL, 2000000014LL, 2000000018LL;
  CHECK(integer_rank(big) == 1);
  CHECK(integer_rank(IntMatrix::Zero(4, 2)) == 0);
}

TEST_CASE("tree enumeration matches an independent recurrence") {
  const auto table = testing::oracle::wedderburn_etherington_table(16);
  for (int n = 1; n <= 16; ++n) {
    CHECK(wedderburn_etherington(n) == table[static_cast<std::size_t>(n)]);
    if (n <= 14) {
      const auto trees = enumerate_binary_trees(n);
      CHECK(trees.size() == table[static_cast<std::size_t>(n)]);
      std::set<std::string> shapes;
      for (const auto& t : trees) {
        CHECK(t.leaf_count() == static_cast<std::size_t>(n));
        shapes.insert(t.canonical());
      }
      CHECK(shapes.size() == trees.size());
    }
  }
  CHECK(enumerate_binary_trees(16).size() == 10905);
  CHECK(enumerate_binary_trees(1).size() == 1);
  CHECK(enumerate_binary_trees(4).size() == 2);
  CHECK_THROWS_AS(enumerate_binary_trees(0), RangeError);
  CHECK_THROWS_AS(enumerate_binary_trees(21), RangeError);
}

TEST_CASE("tree shapes") {
  const auto b = CollabTree::balanced(3);
  CHECK(b.leaf_count() == 8);
  CHECK(b.internal_count() == 7);
  CHECK(b.depth() == 3);
  const auto caterpillar = CollabTree::join(CollabTree::join(CollabTree::leaf(), CollabTree::leaf()), CollabTree::leaf());
  CHECK(caterpillar.depth() == 2);
  CHECK(caterpillar.canonical() == "(x(xx))");
  const auto order = caterpillar.internal_nodes();
  REQUIRE(order.size() == 2);
  CHECK(order.back() == caterpillar.root());
}

TEST_CASE("tree networks") {
  const auto two = tree_to_crn(CollabTree::balanced(1));
  CHECK(two.crn.num_states() == 3);
  CHECK(two.crn.num_reactions() == 2);

  const auto eight = tree_to_crn(CollabTree::balanced(3));
  CHECK(eight.crn.num_states() == 15);
  CHECK(eight.crn.num_reactions() == 14);
  CHECK(eight.size_query.size() == 8);

  for (int n = 2; n <= 8; ++n)
    for (const auto& t : enumerate_binary_trees(n)) {
      const auto tm = tree_to_crn(t);
      CHECK(is_collaboration_dag(tm.crn));
      CHECK(deficiency(tm.crn).deficiency == 0);
      CHECK(is_weakly_reversible(tm.crn));
      CHECK(tm.crn.num_types() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("tree rates carry into the network") {
  auto t = CollabTree::balanced(1);
  t.set_rates(t.root(), 0.25, 4.0);
  const auto tm = tree_to_crn(t);
  CHECK(tm.crn.rates() == std::vector<double>{0.25, 4.0});
}
