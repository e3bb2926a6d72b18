#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cagg/crypto.hpp"
#include "cagg/domain.hpp"
#include "cagg/error.hpp"

namespace cagg {

using NodeId = std::uint32_t;
inline constexpr NodeId kBaseStation = 0;

/// Undirected connectivity graph over dense ids 0..sensor_count (0 is the BS).
class Graph {
 public:
  explicit Graph(std::size_t sensor_count = 0) : adj_(sensor_count + 1) {}

  void add_edge(NodeId a, NodeId b) {
    if (a == b) throw Error(Errc::scenario_invalid, "self loop on node " + std::to_string(a));
    if (a >= adj_.size() || b >= adj_.size()) {
      throw Error(Errc::scenario_invalid, "edge " + std::to_string(a) + "-" + std::to_string(b) + " out of range");
    }
    auto& na = adj_[a];
    if (std::find(na.begin(), na.end(), b) != na.end()) return;
    na.push_back(b);
    adj_[b].push_back(a);
  }

  std::size_t sensor_count() const { return adj_.size() - 1; }
  std::size_t vertex_count() const { return adj_.size(); }
  const std::vector<NodeId>& neighbors(NodeId id) const { return adj_.at(id); }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& n : adj_) twice += n.size();
    return twice / 2;
  }

  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId a = 0; a < adj_.size(); ++a) {
      for (NodeId b : adj_[a]) {
        if (a < b) out.emplace_back(a, b);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<std::vector<NodeId>> adj_;
};

/// Aggregation tree rooted at the base station.
class Tree {
 public:
  Tree() = default;

  std::size_t sensor_count() const { return parent_.empty() ? 0 : parent_.size() - 1; }
  std::size_t vertex_count() const { return parent_.size(); }
  NodeId root() const { return root_; }

  NodeId parent(NodeId id) const { return parent_.at(id); }
  const std::vector<NodeId>& children(NodeId id) const { return children_.at(id); }
  std::uint32_t depth(NodeId id) const { return depth_.at(id); }
  bool is_leaf(NodeId id) const { return children_.at(id).empty(); }

  std::uint32_t height() const { return depth_.empty() ? 0 : *std::max_element(depth_.begin(), depth_.end()); }

  std::uint64_t depth_sum() const { return std::accumulate(depth_.begin(), depth_.end(), std::uint64_t{0}); }

  bool is_ancestor(NodeId ancestor, NodeId id) const {
    while (id != root_) {
      id = parent_[id];
      if (id == ancestor) return true;
    }
    return false;
  }

  /// Every node in the subtree rooted at `id`, including `id`, ascending.
  std::vector<NodeId> subtree(NodeId id) const {
    std::vector<NodeId> out{id};
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (NodeId c : children_[out[i]]) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId id = 0; id < parent_.size(); ++id) {
      if (id != root_) out.emplace_back(parent_[id], id);
    }
    return out;
  }

  /// Builds directly from a parent vector (parent[root] == root).
  static Tree from_parents(std::vector<NodeId> parents, NodeId root = kBaseStation) {
    Tree t;
    t.root_ = root;
    t.parent_ = std::move(parents);
    const auto n = t.parent_.size();
    t.children_.assign(n, {});
    t.depth_.assign(n, 0);
    for (NodeId id = 0; id < n; ++id) {
      if (id != root) t.children_.at(t.parent_[id]).push_back(id);
    }
    for (auto& c : t.children_) std::sort(c.begin(), c.end());
    std::vector<NodeId> order{root};
    std::vector<bool> seen(n, false);
    seen[root] = true;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (NodeId c : t.children_[order[i]]) {
        if (seen[c]) throw Error(Errc::scenario_invalid, "parent map contains a cycle");
        seen[c] = true;
        t.depth_[c] = t.depth_[order[i]] + 1;
        order.push_back(c);
      }
    }
    if (order.size() != n) throw Error(Errc::disconnected_graph, "parent map does not reach every node");
    return t;
  }

 private:
  NodeId root_ = kBaseStation;
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::uint32_t> depth_;
};

/// Level-synchronous BFS spanning tree. Each node attaches to the
/// smallest-id neighbour on the previous level.
inline Tree build_tree(const Graph& graph, NodeId root = kBaseStation) {
  const auto n = graph.vertex_count();
  if (root >= n) throw Error(Errc::disconnected_graph, "root not in graph");
  constexpr NodeId kUnset = ~NodeId{0};
  std::vector<NodeId> parent(n, kUnset);
  parent[root] = root;
  std::vector<NodeId> level{root};
  std::size_t reached = 1;
  while (!level.empty()) {
    std::sort(level.begin(), level.end());
    std::vector<NodeId> next;
    for (NodeId u : level) {
      for (NodeId v : graph.neighbors(u)) {
        if (parent[v] == kUnset) {
          parent[v] = u;
          next.push_back(v);
        }
      }
    }
    reached += next.size();
    level = std::move(next);
  }
  if (reached != n) {
    for (NodeId id = 0; id < n; ++id) {
      if (parent[id] == kUnset) {
        throw Error(Errc::disconnected_graph, "node " + std::to_string(id) + " unreachable from root");
      }
    }
  }
  return Tree::from_parents(std::move(parent), root);
}

// ---- synthetic graph families ----

inline Graph path_graph(std::size_t sensors) {
  Graph g(sensors);
  for (NodeId i = 1; i <= sensors; ++i) g.add_edge(i - 1, i);
  return g;
}

inline Graph star_graph(std::size_t sensors) {
  Graph g(sensors);
  for (NodeId i = 1; i <= sensors; ++i) g.add_edge(kBaseStation, i);
  return g;
}

/// Random recursive tree: node i attaches to a uniform node among 0..i-1.
inline Graph random_recursive_tree(std::size_t sensors, std::uint64_t seed) {
  Graph g(sensors);
  std::mt19937_64 rng(seed);
  for (NodeId i = 1; i <= sensors; ++i) g.add_edge(static_cast<NodeId>(rng() % i), i);
  return g;
}

/// Random geometric graph in the unit square with the BS at the centre.
/// The radius grows by 10% until the graph is connected.
inline Graph random_geometric_graph(std::size_t sensors, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<std::pair<double, double>> pos(sensors + 1, {0.5, 0.5});
  for (std::size_t i = 1; i <= sensors; ++i) pos[i] = {unit(), unit()};
  if (radius <= 0.0) radius = std::sqrt(2.0 * std::log(static_cast<double>(sensors) + 2.0) / (sensors + 1.0));
  for (;;) {
    Graph g(sensors);
    for (NodeId a = 0; a <= sensors; ++a) {
      for (NodeId b = a + 1; b <= sensors; ++b) {
        double dx = pos[a].first - pos[b].first, dy = pos[a].second - pos[b].second;
        if (dx * dx + dy * dy <= radius * radius) g.add_edge(a, b);
      }
    }
    try {
      build_tree(g);
      return g;
    } catch (const Error&) {
      radius *= 1.1;
    }
  }
}

// ---- topology file: "nodes <n>" then "edge <a> <b>" per line ----

inline Graph parse_topology(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  bool have_nodes = false;
  Graph g;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    auto fail = [&](const std::string& why) {
      throw Error(Errc::scenario_invalid, "topology line " + std::to_string(lineno) + ": " + why);
    };
    if (kw == "nodes") {
      long long n = 0;
      if (have_nodes || !(ls >> n) || n <= 0) fail("expected a single positive 'nodes <n>'");
      g = Graph(static_cast<std::size_t>(n));
      have_nodes = true;
    } else if (kw == "edge") {
      long long a = -1, b = -1;
      if (!have_nodes) fail("'edge' before 'nodes'");
      if (!(ls >> a >> b) || a < 0 || b < 0) fail("expected 'edge <a> <b>'");
      try {
        g.add_edge(static_cast<NodeId>(a), static_cast<NodeId>(b));
      } catch (const Error& e) {
        fail(e.detail());
      }
    } else {
      fail("unknown keyword '" + kw + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing token '" + extra + "'");
  }
  if (!have_nodes) throw Error(Errc::scenario_invalid, "topology has no 'nodes' header");
  return g;
}

inline Graph load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::scenario_invalid, "cannot open topology file '" + path + "'");
  return parse_topology(in);
}

inline void write_topology(std::ostream& out, const Graph& g) {
  out << "nodes " << g.sensor_count() << '\n';
  for (auto [a, b] : g.edges()) out << "edge " << a << ' ' << b << '\n';
}

// ---- provisioning ----

struct NodeSecrets {
  Key key;
  Key key_prime;
  DomainValue origin;
};

/// Pre-deployed key material. `nodes` and `edge_keys` are indexed by node
/// id; an edge is named by its child endpoint. Index 0 is unused.
struct Provisioning {
  std::vector<NodeSecrets> nodes;
  std::vector<Key> edge_keys;

  const Key& edge_key(NodeId child) const { return edge_keys.at(child); }
};

inline Provisioning provision(const Tree& tree, std::uint64_t seed, const DomainParams& domain = {}) {
  std::mt19937_64 rng(seed);
  std::set<Key> used;
  auto fresh_key = [&] {
    for (;;) {
      Key k;
      for (std::size_t i = 0; i < k.bytes.size(); i += 8) {
        auto w = rng();
        for (int b = 0; b < 8; ++b) k.bytes[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
      }
      if (used.insert(k).second) return k;
    }
  };
  const auto n = tree.vertex_count();
  Provisioning p;
  p.nodes.resize(n);
  p.edge_keys.resize(n);
  const auto span = domain.max_raw() + 1;
  for (NodeId id = 1; id < n; ++id) {
    p.nodes[id].key = fresh_key();
    p.nodes[id].key_prime = fresh_key();
    p.nodes[id].origin = DomainValue(rng() % span);
  }
  for (NodeId id = 1; id < n; ++id) p.edge_keys[id] = fresh_key();
  return p;
}

}  // namespace cagg
