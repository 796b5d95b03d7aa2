#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "npnce/error.hpp"

namespace npnce {

using Node = std::size_t;
/// Ordered pair (from, to).
using Edge = std::pair<Node, Node>;

namespace detail {

inline void check_node(Node v, std::size_t p, const char* who) {
  if (v >= p) throw InputError(std::string(who) + ": node " + std::to_string(v) + " out of range (p = " + std::to_string(p) + ")");
}

// Kahn's algorithm on a directed edge list; true when no directed cycle.
inline bool is_acyclic(std::size_t p, const std::vector<std::set<Node>>& children) {
  std::vector<std::size_t> indegree(p, 0);
  for (const auto& out : children)
    for (Node c : out) ++indegree[c];
  std::vector<Node> ready;
  for (Node v = 0; v < p; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    const Node v = ready.back();
    ready.pop_back();
    ++visited;
    for (Node c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  return visited == p;
}

}  // namespace detail

/// Directed acyclic graph on nodes 0..p-1 with parent and child index sets.
class Dag {
 public:
  Dag() = default;

  explicit Dag(std::size_t p, const std::vector<Edge>& edges = {}) : p_(p), parents_(p), children_(p) {
    for (const auto& [from, to] : edges) {
      detail::check_node(from, p, "Dag");
      detail::check_node(to, p, "Dag");
      if (from == to) throw InputError("Dag: self-loop at node " + std::to_string(from));
      if (!children_[from].insert(to).second)
        throw InputError("Dag: duplicate edge " + std::to_string(from) + " -> " + std::to_string(to));
      if (children_[to].count(from))
        throw InputError("Dag: edge in both directions between " + std::to_string(from) + " and " + std::to_string(to));
      parents_[to].insert(from);
    }
    if (!detail::is_acyclic(p, children_)) throw InputError("Dag: edges contain a directed cycle");
  }

  std::size_t p() const { return p_; }
  const std::set<Node>& parents(Node v) const {
    detail::check_node(v, p_, "parents");
    return parents_[v];
  }
  const std::set<Node>& children(Node v) const {
    detail::check_node(v, p_, "children");
    return children_[v];
  }
  bool has_edge(Node from, Node to) const { return from < p_ && children_[from].count(to) > 0; }
  bool adjacent(Node a, Node b) const { return has_edge(a, b) || has_edge(b, a); }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Node v = 0; v < p_; ++v)
      for (Node c : children_[v]) out.emplace_back(v, c);
    return out;
  }

  /// Nodes in an order where every parent precedes its children.
  std::vector<Node> topological_order() const {
    std::vector<std::size_t> indegree(p_);
    for (Node v = 0; v < p_; ++v) indegree[v] = parents_[v].size();
    std::vector<Node> order;
    std::set<Node> ready;
    for (Node v = 0; v < p_; ++v)
      if (indegree[v] == 0) ready.insert(v);
    while (!ready.empty()) {
      const Node v = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(v);
      for (Node c : children_[v])
        if (--indegree[c] == 0) ready.insert(c);
    }
    return order;
  }

  friend bool operator==(const Dag& a, const Dag& b) { return a.p_ == b.p_ && a.children_ == b.children_; }

 private:
  std::size_t p_ = 0;
  std::vector<std::set<Node>> parents_;
  std::vector<std::set<Node>> children_;
};

inline const std::set<Node>& parents(const Dag& g, Node v) { return g.parents(v); }

/// Partially directed graph; as the output of cpdag_of it is the completed
/// representation of a Markov equivalence class. Undirected edges are stored
/// once per endpoint in `neighbors`.
class Cpdag {
 public:
  Cpdag() = default;

  explicit Cpdag(std::size_t p, const std::vector<Edge>& directed = {}, const std::vector<Edge>& undirected = {})
      : p_(p), in_(p), out_(p), und_(p) {
    for (const auto& [a, b] : directed) add(a, b, /*directed=*/true);
    for (const auto& [a, b] : undirected) add(a, b, /*directed=*/false);
  }

  static Cpdag from_dag(const Dag& g) { return Cpdag(g.p(), g.edges()); }

  std::size_t p() const { return p_; }
  bool has_directed(Node from, Node to) const { return from < p_ && out_[from].count(to) > 0; }
  bool has_undirected(Node a, Node b) const { return a < p_ && und_[a].count(b) > 0; }
  bool adjacent(Node a, Node b) const { return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b); }

  const std::set<Node>& directed_parents(Node v) const { return in_.at(v); }
  const std::set<Node>& directed_children(Node v) const { return out_.at(v); }
  const std::set<Node>& neighbors(Node v) const { return und_.at(v); }

  /// All nodes adjacent to v by any edge type.
  std::set<Node> adjacencies(Node v) const {
    std::set<Node> all = in_.at(v);
    all.insert(out_[v].begin(), out_[v].end());
    all.insert(und_[v].begin(), und_[v].end());
    return all;
  }

  std::vector<Edge> directed_edges() const {
    std::vector<Edge> out;
    for (Node v = 0; v < p_; ++v)
      for (Node c : out_[v]) out.emplace_back(v, c);
    return out;
  }

  /// Undirected edges as (a, b) with a < b.
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    for (Node v = 0; v < p_; ++v)
      for (Node w : und_[v])
        if (v < w) out.emplace_back(v, w);
    return out;
  }

  std::size_t undirected_count() const { return undirected_edges().size(); }

  /// Turns the undirected edge from - to into from -> to.
  void orient(Node from, Node to) {
    if (!has_undirected(from, to))
      throw InputError("Cpdag::orient: no undirected edge " + std::to_string(from) + " -- " + std::to_string(to));
    und_[from].erase(to);
    und_[to].erase(from);
    out_[from].insert(to);
    in_[to].insert(from);
  }

  /// The DAG formed by the directed edges; requires no undirected edges.
  Dag to_dag() const {
    if (undirected_count() != 0) throw InputError("Cpdag::to_dag: graph still has undirected edges");
    return Dag(p_, directed_edges());
  }

  bool directed_part_acyclic() const { return detail::is_acyclic(p_, out_); }

  /// Unshielded colliders a -> c <- b with a < b, as (a, c, b).
  std::set<std::tuple<Node, Node, Node>> v_structures() const {
    std::set<std::tuple<Node, Node, Node>> out;
    for (Node c = 0; c < p_; ++c)
      for (auto a = in_[c].begin(); a != in_[c].end(); ++a)
        for (auto b = std::next(a); b != in_[c].end(); ++b)
          if (!adjacent(*a, *b)) out.emplace(*a, c, *b);
    return out;
  }

  friend bool operator==(const Cpdag& a, const Cpdag& b) {
    return a.p_ == b.p_ && a.out_ == b.out_ && a.und_ == b.und_;
  }

 private:
  void add(Node a, Node b, bool directed) {
    detail::check_node(a, p_, "Cpdag");
    detail::check_node(b, p_, "Cpdag");
    if (a == b) throw InputError("Cpdag: self-loop at node " + std::to_string(a));
    if (adjacent(a, b))
      throw InputError("Cpdag: more than one edge between " + std::to_string(a) + " and " + std::to_string(b));
    if (directed) {
      out_[a].insert(b);
      in_[b].insert(a);
    } else {
      und_[a].insert(b);
      und_[b].insert(a);
    }
  }

  std::size_t p_ = 0;
  std::vector<std::set<Node>> in_;
  std::vector<std::set<Node>> out_;
  std::vector<std::set<Node>> und_;
};

inline std::set<std::tuple<Node, Node, Node>> v_structures(const Dag& g) { return Cpdag::from_dag(g).v_structures(); }

enum class ConflictPolicy {
  /// Throw OrientationConflict when an edge is forced both ways.
  raise,
  /// Leave such edges undirected and report them.
  keep_undirected,
};

namespace detail {

// True when the Meek rules force the undirected edge x - y into x -> y.
inline bool meek_forces(const Cpdag& g, Node x, Node y) {
  // R1: c -> x - y with c, y nonadjacent.
  for (Node c : g.directed_parents(x))
    if (c != y && !g.adjacent(c, y)) return true;
  // R2: x -> c -> y.
  for (Node c : g.directed_children(x))
    if (g.has_directed(c, y)) return true;
  // R3: x - c -> y, x - d -> y, c and d nonadjacent.
  std::vector<Node> mids;
  for (Node c : g.neighbors(x))
    if (c != y && g.has_directed(c, y)) mids.push_back(c);
  for (std::size_t a = 0; a < mids.size(); ++a)
    for (std::size_t b = a + 1; b < mids.size(); ++b)
      if (!g.adjacent(mids[a], mids[b])) return true;
  // R4: c -> d -> y, x adjacent to c and d, c and y nonadjacent.
  for (Node d : g.directed_parents(y)) {
    if (d == x || !g.adjacent(x, d)) continue;
    for (Node c : g.directed_parents(d))
      if (c != x && c != y && g.adjacent(x, c) && !g.adjacent(c, y)) return true;
  }
  return false;
}

}  // namespace detail

/// Orientations that a meek_close run left undirected because both
/// directions were forced.
struct MeekReport {
  std::vector<Edge> conflicts;
};

/// Applies Meek's rules R1-R4 until no undirected edge can be oriented.
inline Cpdag meek_close(Cpdag g, ConflictPolicy policy = ConflictPolicy::raise, MeekReport* report = nullptr) {
  std::set<Edge> frozen;
  while (true) {
    std::vector<Edge> forced;
    for (const auto& [a, b] : g.undirected_edges()) {
      if (frozen.count({a, b})) continue;
      const bool ab = detail::meek_forces(g, a, b);
      const bool ba = detail::meek_forces(g, b, a);
      if (ab && ba) {
        if (policy == ConflictPolicy::raise)
          throw OrientationConflict("meek_close: edge " + std::to_string(a) + " -- " + std::to_string(b) +
                                    " forced in both directions");
        frozen.insert({a, b});
        if (report) report->conflicts.emplace_back(a, b);
      } else if (ab) {
        forced.emplace_back(a, b);
      } else if (ba) {
        forced.emplace_back(b, a);
      }
    }
    if (forced.empty()) return g;
    for (const auto& [from, to] : forced) g.orient(from, to);
  }
}

/// Completed PDAG of the Markov equivalence class of g: v-structures
/// directed, everything else undirected, then Meek-closed.
inline Cpdag cpdag_of(const Dag& g) {
  const auto colliders = v_structures(g);
  std::set<Edge> compelled;
  for (const auto& [a, c, b] : colliders) {
    compelled.emplace(a, c);
    compelled.emplace(b, c);
  }
  std::vector<Edge> directed(compelled.begin(), compelled.end());
  std::vector<Edge> undirected;
  for (const auto& [from, to] : g.edges())
    if (!compelled.count({from, to})) undirected.emplace_back(std::min(from, to), std::max(from, to));
  return meek_close(Cpdag(g.p(), directed, undirected));
}

inline constexpr std::size_t kDefaultExtensionCap = 256;

/// All consistent extensions of c: acyclic orientations of its undirected
/// edges that keep its directed edges and its v-structures and add none.
/// Built by orienting one edge at a time, Meek-closing, and recursing.
inline std::vector<Dag> enumerate_extensions(const Cpdag& c, std::size_t cap = kDefaultExtensionCap) {
  if (cap < 1) throw InputError("enumerate_extensions: cap must be at least 1");
  const auto target_colliders = c.v_structures();
  std::map<std::vector<Edge>, Dag> found;

  std::function<void(const Cpdag&)> recurse = [&](const Cpdag& g) {
    if (!g.directed_part_acyclic()) return;
    const auto undirected = g.undirected_edges();
    if (undirected.empty()) {
      if (g.v_structures() != target_colliders) return;
      auto edges = g.directed_edges();
      if (found.count(edges)) return;
      found.emplace(edges, g.to_dag());
      if (found.size() > cap)
        throw ExtensionCapExceeded("enumerate_extensions: more than " + std::to_string(cap) + " consistent extensions");
      return;
    }
    const auto [a, b] = undirected.front();
    for (const auto& [from, to] : {Edge{a, b}, Edge{b, a}}) {
      Cpdag next = g;
      next.orient(from, to);
      try {
        next = meek_close(std::move(next));
      } catch (const OrientationConflict&) {
        continue;
      }
      recurse(next);
    }
  };
  recurse(c);

  if (found.empty()) throw EstimationError("enumerate_extensions: CPDAG admits no consistent extension");
  std::vector<Dag> out;
  out.reserve(found.size());
  for (auto& [edges, dag] : found) out.push_back(std::move(dag));
  return out;
}

}  // namespace npnce
