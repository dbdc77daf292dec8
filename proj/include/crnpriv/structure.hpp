#pragma once

// Structural analysis of reaction networks (linkage classes, deficiency,
// weak reversibility, conservation laws) and binary collaboration trees.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crnpriv/crn.hpp"

namespace crnpriv {

struct StructureReport {
  std::vector<std::vector<std::size_t>> linkage_classes;
  bool weakly_reversible = false;
  std::size_t num_complexes = 0;
  std::size_t rank_gamma = 0;
  std::int64_t deficiency = 0;
  bool complex_balanced_certified = false;
  bool collaboration_dag = false;
  std::vector<std::vector<std::int64_t>> conservation_basis;
};

/// Connected components of the undirected complex graph, each sorted, ordered
/// by smallest member.
std::vector<std::vector<std::size_t>> linkage_classes(const Crn& crn);

/// Every linkage class strongly connected in the directed complex graph.
bool is_weakly_reversible(const Crn& crn);

/// Exact rank of an integer matrix (fraction-free elimination).
std::size_t integer_rank(const IntMatrix& m);

struct DeficiencyResult {
  std::int64_t deficiency = 0;
  std::size_t rank = 0;
};
DeficiencyResult deficiency(const Crn& crn);

/// Reactions pair up with their reverses, each pair owns its two complexes,
/// and the state/reaction-node digraph is acyclic.
bool is_collaboration_dag(const Crn& crn);

/// Integer basis of {c : c^T Gamma = 0}, each vector primitive with a
/// positive leading entry.
std::vector<std::vector<std::int64_t>> conservation_laws(const Crn& crn);

/// Whether c lies in the rational span of the basis.
bool in_span(const std::vector<std::vector<std::int64_t>>& basis, const std::vector<std::int64_t>& c);

StructureReport analyze_structure(const Crn& crn);

/// Rooted binary tree. Leaves are elementary types, internal nodes compound
/// states carrying a (forward, backward) rate pair.
class CollabTree {
 public:
  struct Node {
    int left = -1;
    int right = -1;
    double forward = 1.0;
    double backward = 1.0;
    bool is_leaf() const noexcept { return left < 0; }
  };

  static CollabTree leaf();
  static CollabTree join(const CollabTree& a, const CollabTree& b);
  /// Perfectly balanced tree with 2^levels leaves.
  static CollabTree balanced(int levels);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t root() const noexcept { return nodes_.size() - 1; }
  std::size_t leaf_count() const noexcept;
  std::size_t internal_count() const noexcept { return nodes_.size() - leaf_count(); }
  /// Edges on the longest root-to-leaf path.
  int depth() const;
  /// Canonical shape string: leaves "x", internal "(ab)" with children
  /// ordered by (leaf count, canonical string).
  std::string canonical() const;

  /// Internal nodes in post order (children before parents).
  std::vector<std::size_t> internal_nodes() const;
  void set_rates(std::size_t node, double forward, double backward);

 private:
  std::vector<Node> nodes_;  // children precede parents; root is last
};

/// Every unlabeled rooted binary tree shape with n leaves in canonical order.
/// Throws RangeError unless 1 <= n <= 20.
std::vector<CollabTree> enumerate_binary_trees(int n_leaves);

/// Wedderburn-Etherington number via the standard recurrence.
std::uint64_t wedderburn_etherington(int n);

struct TreeModel {
  Crn crn;
  QuerySpec size_query;  // group i counts compounds built from i types
};

/// Leaf k becomes type "k+1" with state a{k+1}; each internal node contributes
/// child + child <-> parent. The query groups states by compound size 1..n.
TreeModel tree_to_crn(const CollabTree& tree);

}  // namespace crnpriv
