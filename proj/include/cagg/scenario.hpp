#pragma once

// Line-oriented scenario files. Keywords:
//
//   nodes <n>                       sensors 1..n (0 is the base station)
//   edge <a> <b>                    undirected link
//   generator rrt|rgg|path|star <n> [radius]
//   seed <u64>
//   domain <u> <v> <scale>
//   rounds <r>
//   function sum|mean
//   compromise <id> <behavior> [args]
//   trigger <round>
//   force-attest
//   audit-prob <p>
//   offline <id> [from_round]
//
// '#' starts a comment.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "cagg/adversary.hpp"
#include "cagg/domain.hpp"
#include "cagg/packet.hpp"
#include "cagg/topology.hpp"

namespace cagg {

enum class GraphFamily { explicit_edges, random_recursive, random_geometric, path, star };

inline const char* family_name(GraphFamily f) {
  switch (f) {
    case GraphFamily::explicit_edges: return "explicit";
    case GraphFamily::random_recursive: return "rrt";
    case GraphFamily::random_geometric: return "rgg";
    case GraphFamily::path: return "path";
    case GraphFamily::star: return "star";
  }
  return "?";
}

struct Scenario {
  GraphFamily family = GraphFamily::random_recursive;
  std::optional<Graph> graph;  // explicit topology
  std::size_t generator_nodes = 16;
  double radius = 0.0;         // rgg only; 0 picks a connectivity-scaled default
  std::uint64_t seed = 1;
  DomainParams domain;
  std::uint64_t rounds = 1;
  AggFunction function = AggFunction::sum;
  AttackPlan plan;
  bool force_attest = false;
  double audit_probability = 0.0;
  std::map<NodeId, std::uint64_t> offline;  // node -> first silent round
  std::uint32_t timeout_factor = 10;

  Graph build_graph() const {
    switch (family) {
      case GraphFamily::explicit_edges:
        if (!graph) throw Error(Errc::scenario_invalid, "no topology given");
        return *graph;
      case GraphFamily::random_recursive: return random_recursive_tree(generator_nodes, seed);
      case GraphFamily::random_geometric: return random_geometric_graph(generator_nodes, radius, seed);
      case GraphFamily::path: return path_graph(generator_nodes);
      case GraphFamily::star: return star_graph(generator_nodes);
    }
    throw Error(Errc::scenario_invalid, "unknown graph family");
  }

  void validate() const {
    if (!domain.valid()) throw Error(Errc::scenario_invalid, "domain needs u < v and scale > 0");
    if (rounds == 0) throw Error(Errc::scenario_invalid, "rounds must be positive");
    if (family != GraphFamily::explicit_edges && generator_nodes == 0) {
      throw Error(Errc::scenario_invalid, "generator needs at least one node");
    }
    if (audit_probability < 0.0 || audit_probability > 1.0) {
      throw Error(Errc::scenario_invalid, "audit probability must lie in [0, 1]");
    }
    if (plan.trigger_round == 0) throw Error(Errc::scenario_invalid, "trigger round must be positive");
  }
};

namespace detail {

template <typename T>
T read_positive(std::istream& in, const char* what) {
  long double v = 0;
  if (!(in >> v) || v <= 0) throw Error(Errc::scenario_invalid, std::string(what) + " must be a positive number");
  return static_cast<T>(v);
}

inline void expect_end(std::istream& in) {
  std::string extra;
  if (in >> extra) throw Error(Errc::scenario_invalid, "trailing token '" + extra + "'");
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  std::optional<Graph> graph;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    try {
      if (kw == "nodes") {
        if (graph) throw Error(Errc::scenario_invalid, "duplicate 'nodes'");
        graph.emplace(detail::read_positive<std::size_t>(ls, "nodes"));
        sc.family = GraphFamily::explicit_edges;
        detail::expect_end(ls);
      } else if (kw == "edge") {
        if (!graph) throw Error(Errc::scenario_invalid, "'edge' before 'nodes'");
        long long a = -1, b = -1;
        if (!(ls >> a >> b) || a < 0 || b < 0) throw Error(Errc::scenario_invalid, "expected 'edge <a> <b>'");
        graph->add_edge(static_cast<NodeId>(a), static_cast<NodeId>(b));
        detail::expect_end(ls);
      } else if (kw == "generator") {
        std::string fam;
        ls >> fam;
        if (fam == "rrt") sc.family = GraphFamily::random_recursive;
        else if (fam == "rgg") sc.family = GraphFamily::random_geometric;
        else if (fam == "path") sc.family = GraphFamily::path;
        else if (fam == "star") sc.family = GraphFamily::star;
        else throw Error(Errc::scenario_invalid, "unknown generator '" + fam + "'");
        sc.generator_nodes = detail::read_positive<std::size_t>(ls, "generator size");
        if (sc.family == GraphFamily::random_geometric) {
          double r = 0;
          if (ls >> r) sc.radius = r;
        }
        detail::expect_end(ls);
      } else if (kw == "seed") {
        if (!(ls >> sc.seed)) throw Error(Errc::scenario_invalid, "seed must be an unsigned integer");
        detail::expect_end(ls);
      } else if (kw == "domain") {
        if (!(ls >> sc.domain.lower >> sc.domain.upper >> sc.domain.scale)) {
          throw Error(Errc::scenario_invalid, "expected 'domain <u> <v> <scale>'");
        }
        if (!sc.domain.valid()) throw Error(Errc::scenario_invalid, "domain needs u < v and scale > 0");
        detail::expect_end(ls);
      } else if (kw == "rounds") {
        sc.rounds = detail::read_positive<std::uint64_t>(ls, "rounds");
        detail::expect_end(ls);
      } else if (kw == "function") {
        std::string f;
        ls >> f;
        if (f == "sum") sc.function = AggFunction::sum;
        else if (f == "mean") sc.function = AggFunction::mean;
        else throw Error(Errc::scenario_invalid, "function must be sum or mean");
        detail::expect_end(ls);
      } else if (kw == "compromise") {
        long long id = -1;
        if (!(ls >> id) || id <= 0) throw Error(Errc::scenario_invalid, "expected 'compromise <id> <behavior>'");
        sc.plan.add(static_cast<NodeId>(id), parse_behavior(ls));
      } else if (kw == "trigger") {
        sc.plan.trigger_round = detail::read_positive<std::uint64_t>(ls, "trigger");
        detail::expect_end(ls);
      } else if (kw == "force-attest") {
        sc.force_attest = true;
        detail::expect_end(ls);
      } else if (kw == "audit-prob") {
        if (!(ls >> sc.audit_probability) || sc.audit_probability < 0 || sc.audit_probability > 1) {
          throw Error(Errc::scenario_invalid, "audit-prob must lie in [0, 1]");
        }
        detail::expect_end(ls);
      } else if (kw == "offline") {
        long long id = -1;
        if (!(ls >> id) || id <= 0) throw Error(Errc::scenario_invalid, "expected 'offline <id> [from_round]'");
        std::uint64_t from = 1;
        if (std::string tok; ls >> tok) {
          std::istringstream ts(tok);
          if (!(ts >> from) || from == 0) throw Error(Errc::scenario_invalid, "offline round must be positive");
        }
        sc.offline[static_cast<NodeId>(id)] = from;
        detail::expect_end(ls);
      } else {
        throw Error(Errc::scenario_invalid, "unknown keyword '" + kw + "'");
      }
    } catch (const Error& e) {
      throw Error(Errc::scenario_invalid, "line " + std::to_string(lineno) + ": " + e.detail());
    }
  }
  if (graph) sc.graph = std::move(graph);
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::scenario_invalid, "cannot open scenario '" + path + "'");
  return parse_scenario(in);
}

}  // namespace cagg
