#include "crnpriv/structure.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

#include "crnpriv/error.hpp"

namespace crnpriv {
namespace {

using Wide = __int128;

Wide wide_abs(Wide v) { return v < 0 ? -v : v; }

Wide wide_gcd(Wide a, Wide b) {
  a = wide_abs(a);
  b = wide_abs(b);
  while (b != 0) {
    Wide t = a % b;
    a = b;
    b = t;
  }
  return a;
}

struct Echelon {
  std::vector<std::vector<Wide>> rows;  // reduced rows, one per pivot
  std::vector<std::size_t> pivots;      // pivot column per row
};

// Integer reduced row-echelon form. Every elimination step is
// row_i <- p * row_i - row_i[c] * row_p followed by division by the row gcd,
// so all arithmetic stays in the integers.
Echelon integer_rref(const IntMatrix& m) {
  constexpr Wide limit = Wide(1) << 60;
  std::vector<std::vector<Wide>> a(static_cast<std::size_t>(m.rows()),
                                   std::vector<Wide>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);

  auto normalize = [](std::vector<Wide>& row) {
    Wide g = 0;
    for (Wide v : row) g = wide_gcd(g, v);
    if (g > 1)
      for (Wide& v : row) v /= g;
  };

  Echelon e;
  std::size_t next = 0;
  const std::size_t cols = static_cast<std::size_t>(m.cols());
  for (std::size_t c = 0; c < cols && next < a.size(); ++c) {
    std::size_t p = next;
    while (p < a.size() && a[p][c] == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[next]);
    if (a[next][c] < 0)
      for (Wide& v : a[next]) v = -v;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i == next || a[i][c] == 0) continue;
      const Wide f = a[i][c];
      const Wide piv = a[next][c];
      for (std::size_t j = 0; j < cols; ++j) {
        a[i][j] = piv * a[i][j] - f * a[next][j];
        if (wide_abs(a[i][j]) > limit) throw NumericalError("integer overflow in exact row reduction");
      }
      normalize(a[i]);
    }
    e.pivots.push_back(c);
    ++next;
  }
  a.resize(next);
  e.rows = std::move(a);
  return e;
}

std::vector<std::vector<std::int64_t>> integer_null_space(const IntMatrix& m) {
  const Echelon e = integer_rref(m);
  const std::size_t cols = static_cast<std::size_t>(m.cols());
  std::vector<bool> is_pivot(cols, false);
  for (auto c : e.pivots) is_pivot[c] = true;

  Wide lcm = 1;
  for (std::size_t r = 0; r < e.rows.size(); ++r) {
    const Wide p = e.rows[r][e.pivots[r]];
    lcm = lcm / wide_gcd(lcm, p) * p;
  }

  std::vector<std::vector<std::int64_t>> basis;
  for (std::size_t f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    std::vector<Wide> v(cols, 0);
    v[f] = lcm;
    for (std::size_t r = 0; r < e.rows.size(); ++r) {
      v[e.pivots[r]] = -lcm * e.rows[r][f] / e.rows[r][e.pivots[r]];
    }
    Wide g = 0;
    for (Wide x : v) g = wide_gcd(g, x);
    Wide sign = 1;
    for (Wide x : v) {
      if (x != 0) {
        sign = x < 0 ? -1 : 1;
        break;
      }
    }
    std::vector<std::int64_t> out(cols);
    for (std::size_t j = 0; j < cols; ++j) out[j] = static_cast<std::int64_t>(sign * v[j] / g);
    basis.push_back(std::move(out));
  }
  return basis;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> linkage_classes(const Crn& crn) {
  UnionFind uf(crn.num_complexes());
  for (const auto& r : crn.reactions()) uf.unite(r.source, r.target);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < crn.num_complexes(); ++c) groups[uf.find(c)].push_back(c);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

bool is_weakly_reversible(const Crn& crn) {
  // Weakly reversible iff every reaction's source is reachable from its target.
  const std::size_t n = crn.num_complexes();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& r : crn.reactions()) adj[r.source].push_back(r.target);
  for (const auto& r : crn.reactions()) {
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> todo;
    todo.push(r.target);
    seen[r.target] = true;
    while (!todo.empty() && !seen[r.source]) {
      auto c = todo.front();
      todo.pop();
      for (auto d : adj[c]) {
        if (!seen[d]) {
          seen[d] = true;
          todo.push(d);
        }
      }
    }
    if (!seen[r.source]) return false;
  }
  return true;
}

std::size_t integer_rank(const IntMatrix& m) { return integer_rref(m).pivots.size(); }

DeficiencyResult deficiency(const Crn& crn) {
  DeficiencyResult d;
  d.rank = integer_rank(stoichiometry_matrix(crn));
  d.deficiency = static_cast<std::int64_t>(crn.num_complexes()) - static_cast<std::int64_t>(linkage_classes(crn).size()) -
                 static_cast<std::int64_t>(d.rank);
  return d;
}

bool is_collaboration_dag(const Crn& crn) {
  const auto& rs = crn.reactions();
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> by_edge;
  for (std::size_t l = 0; l < rs.size(); ++l) {
    if (!by_edge.emplace(std::make_pair(rs[l].source, rs[l].target), l).second) return false;
  }
  // Forward reaction of each pair is the one declared first.
  std::vector<std::size_t> forward;
  std::vector<int> owner(crn.num_complexes(), -1);
  for (std::size_t l = 0; l < rs.size(); ++l) {
    auto rev = by_edge.find({rs[l].target, rs[l].source});
    if (rev == by_edge.end()) return false;
    if (rev->second < l) continue;
    const int pair = static_cast<int>(forward.size());
    forward.push_back(l);
    for (std::size_t c : {rs[l].source, rs[l].target}) {
      if (owner[c] != -1) return false;
      owner[c] = pair;
    }
  }
  if (2 * forward.size() != crn.num_complexes()) return false;

  // Bipartite digraph: states 0..N_A-1, reaction nodes N_A..N_A+pairs-1.
  const std::size_t na = crn.num_states();
  const std::size_t total = na + forward.size();
  std::vector<std::vector<std::size_t>> adj(total);
  std::vector<std::size_t> indegree(total, 0);
  for (std::size_t p = 0; p < forward.size(); ++p) {
    const auto& in = crn.reactants(forward[p]);
    const auto& out = crn.products(forward[p]);
    for (std::size_t i = 0; i < na; ++i) {
      if (in[i] > 0) {
        adj[i].push_back(na + p);
        ++indegree[na + p];
      }
      if (out[i] > 0) {
        adj[na + p].push_back(i);
        ++indegree[i];
      }
    }
  }
  std::queue<std::size_t> ready;
  for (std::size_t v = 0; v < total; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    auto v = ready.front();
    ready.pop();
    ++visited;
    for (auto w : adj[v])
      if (--indegree[w] == 0) ready.push(w);
  }
  return visited == total;
}

std::vector<std::vector<std::int64_t>> conservation_laws(const Crn& crn) {
  return integer_null_space(stoichiometry_matrix(crn).transpose());
}

bool in_span(const std::vector<std::vector<std::int64_t>>& basis, const std::vector<std::int64_t>& c) {
  IntMatrix m(static_cast<Eigen::Index>(basis.size() + 1), static_cast<Eigen::Index>(c.size()));
  for (std::size_t r = 0; r < basis.size(); ++r) {
    if (basis[r].size() != c.size()) throw DimensionMismatch("basis vector length mismatch");
    for (std::size_t j = 0; j < c.size(); ++j) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = basis[r][j];
  }
  for (std::size_t j = 0; j < c.size(); ++j) m(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(j)) = c[j];
  return integer_rank(m) == integer_rank(m.topRows(static_cast<Eigen::Index>(basis.size())));
}

StructureReport analyze_structure(const Crn& crn) {
  StructureReport r;
  r.linkage_classes = linkage_classes(crn);
  r.weakly_reversible = is_weakly_reversible(crn);
  r.num_complexes = crn.num_complexes();
  const auto d = deficiency(crn);
  r.rank_gamma = d.rank;
  r.deficiency = d.deficiency;
  r.complex_balanced_certified = r.weakly_reversible && r.deficiency == 0;
  r.collaboration_dag = is_collaboration_dag(crn);
  r.conservation_basis = conservation_laws(crn);
  return r;
}

// ---------------------------------------------------------------------------
// Collaboration trees

CollabTree CollabTree::leaf() {
  CollabTree t;
  t.nodes_.push_back(Node{});
  return t;
}

CollabTree CollabTree::join(const CollabTree& a, const CollabTree& b) {
  const auto key_a = std::make_tuple(a.leaf_count(), a.canonical());
  const auto key_b = std::make_tuple(b.leaf_count(), b.canonical());
  const CollabTree& first = key_b < key_a ? b : a;
  const CollabTree& second = key_b < key_a ? a : b;

  CollabTree t;
  t.nodes_ = first.nodes_;
  const int shift = static_cast<int>(first.nodes_.size());
  for (Node n : second.nodes_) {
    if (!n.is_leaf()) {
      n.left += shift;
      n.right += shift;
    }
    t.nodes_.push_back(n);
  }
  Node root;
  root.left = static_cast<int>(first.root());
  root.right = static_cast<int>(first.nodes_.size() + second.root());
  t.nodes_.push_back(root);
  return t;
}

CollabTree CollabTree::balanced(int levels) {
  if (levels <= 0) return leaf();
  const CollabTree half = balanced(levels - 1);
  return join(half, half);
}

std::size_t CollabTree::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

int CollabTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_leaf()) d[i] = 1 + std::max(d[static_cast<std::size_t>(nodes_[i].left)], d[static_cast<std::size_t>(nodes_[i].right)]);
  }
  return d.back();
}

std::string CollabTree::canonical() const {
  std::vector<std::string> s(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    s[i] = n.is_leaf() ? "x" : "(" + s[static_cast<std::size_t>(n.left)] + s[static_cast<std::size_t>(n.right)] + ")";
  }
  return s.back();
}

std::vector<std::size_t> CollabTree::internal_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

void CollabTree::set_rates(std::size_t node, double forward, double backward) {
  if (node >= nodes_.size() || nodes_[node].is_leaf()) throw RangeError("rates can only be set on internal nodes");
  nodes_[node].forward = forward;
  nodes_[node].backward = backward;
}

std::vector<CollabTree> enumerate_binary_trees(int n_leaves) {
  if (n_leaves < 1 || n_leaves > 20) throw RangeError("leaf count must lie in [1, 20]");
  std::vector<std::vector<CollabTree>> by_size(static_cast<std::size_t>(n_leaves) + 1);
  by_size[1].push_back(CollabTree::leaf());
  for (int n = 2; n <= n_leaves; ++n) {
    auto& out = by_size[static_cast<std::size_t>(n)];
    for (int i = 1; i <= n / 2; ++i) {
      const auto& small = by_size[static_cast<std::size_t>(i)];
      const auto& large = by_size[static_cast<std::size_t>(n - i)];
      for (std::size_t a = 0; a < small.size(); ++a) {
        for (std::size_t b = (i == n - i ? a : 0); b < large.size(); ++b) out.push_back(CollabTree::join(small[a], large[b]));
      }
    }
    std::vector<std::pair<std::string, std::size_t>> keys;
    for (std::size_t k = 0; k < out.size(); ++k) keys.emplace_back(out[k].canonical(), k);
    std::sort(keys.begin(), keys.end());
    std::vector<CollabTree> sorted;
    sorted.reserve(out.size());
    for (const auto& [key, k] : keys) sorted.push_back(std::move(out[k]));
    out = std::move(sorted);
  }
  return by_size[static_cast<std::size_t>(n_leaves)];
}

std::uint64_t wedderburn_etherington(int n) {
  if (n < 0) throw RangeError("negative index");
  std::vector<std::uint64_t> w(static_cast<std::size_t>(std::max(n, 1)) + 1, 0);
  w[1] = 1;
  for (int m = 2; m <= n; ++m) {
    std::uint64_t sum = 0;
    if (m % 2 == 1) {
      for (int i = 1; i <= (m - 1) / 2; ++i) sum += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(m - i)];
    } else {
      const auto half = w[static_cast<std::size_t>(m / 2)];
      for (int i = 1; i <= m / 2 - 1; ++i) sum += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(m - i)];
      sum += half * (half + 1) / 2;
    }
    w[static_cast<std::size_t>(m)] = sum;
  }
  return w[static_cast<std::size_t>(n)];
}

TreeModel tree_to_crn(const CollabTree& tree) {
  const auto& nodes = tree.nodes();
  std::vector<std::vector<int>> members(nodes.size());
  std::vector<std::size_t> state_of(nodes.size());
  std::vector<std::string> labels;
  std::vector<TypeInfo> types;

  int next_type = 1;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) continue;
    members[i] = {next_type};
    state_of[i] = labels.size();
    labels.push_back("a{" + std::to_string(next_type) + "}");
    types.push_back({std::to_string(next_type), state_of[i]});
    ++next_type;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    auto m = members[static_cast<std::size_t>(nodes[i].left)];
    const auto& r = members[static_cast<std::size_t>(nodes[i].right)];
    m.insert(m.end(), r.begin(), r.end());
    std::sort(m.begin(), m.end());
    members[i] = m;
    std::string label = "a{";
    for (std::size_t k = 0; k < m.size(); ++k) label += (k ? "," : "") + std::to_string(m[k]);
    label += "}";
    state_of[i] = labels.size();
    labels.push_back(label);
  }

  const std::size_t na = labels.size();
  std::vector<ReactionInput> reactions;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    Complex in(na, 0);
    Complex out(na, 0);
    in[state_of[static_cast<std::size_t>(nodes[i].left)]] += 1;
    in[state_of[static_cast<std::size_t>(nodes[i].right)]] += 1;
    out[state_of[i]] = 1;
    reactions.push_back({in, out, nodes[i].forward});
    reactions.push_back({out, in, nodes[i].backward});
  }

  TreeModel model{Crn(labels, types, reactions), {}};
  const std::size_t n = tree.leaf_count();
  std::vector<QuerySpec::Group> groups(n);
  for (std::size_t size = 1; size <= n; ++size) groups[size - 1].name = "size" + std::to_string(size);
  for (std::size_t i = 0; i < nodes.size(); ++i) groups[members[i].size() - 1].states.push_back(state_of[i]);
  for (auto& g : groups) std::sort(g.states.begin(), g.states.end());
  model.size_query = QuerySpec(std::move(groups), na);
  return model;
}

}  // namespace crnpriv
