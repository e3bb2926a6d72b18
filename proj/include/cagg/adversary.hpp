#pragma once

// Attacker model: per-node behaviour overrides for compromised nodes, plus a
// passive-observer experiment over diffused traffic.

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/crypto.hpp"
#include "cagg/node.hpp"

namespace cagg {

enum class BehaviorKind { forge_own, forge_children, noncommit, replay, drop_child };

inline const char* behavior_name(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::forge_own: return "forge_own";
    case BehaviorKind::forge_children: return "forge_children";
    case BehaviorKind::noncommit: return "noncommit";
    case BehaviorKind::replay: return "replay";
    case BehaviorKind::drop_child: return "drop_child";
  }
  return "?";
}

struct Behavior {
  BehaviorKind kind = BehaviorKind::noncommit;
  double delta = 0.0;   // reading units (forge_own, forge_children)
  bool dual = false;    // forge_children on both chains
  bool fresh = false;   // replay with a fresh counter
  NodeId target = 0;    // drop_child

  friend bool operator==(const Behavior&, const Behavior&) = default;
};

struct AttackPlan {
  std::map<NodeId, std::vector<Behavior>> behaviors;
  std::uint64_t trigger_round = 1;

  bool empty() const { return behaviors.empty(); }

  std::set<NodeId> compromised() const {
    std::set<NodeId> out;
    for (const auto& [id, _] : behaviors) out.insert(id);
    return out;
  }

  void add(NodeId id, Behavior b) { behaviors[id].push_back(b); }

  void validate(const Tree& tree) const {
    for (const auto& [id, list] : behaviors) {
      if (id == kBaseStation || id >= tree.vertex_count()) {
        throw Error(Errc::scenario_invalid, "compromised node " + std::to_string(id) + " is not provisioned");
      }
      for (const auto& b : list) {
        if (b.kind == BehaviorKind::drop_child) {
          const auto& ch = tree.children(id);
          if (std::find(ch.begin(), ch.end(), b.target) == ch.end()) {
            throw Error(Errc::scenario_invalid, "drop_child target " + std::to_string(b.target) +
                                                    " is not a child of " + std::to_string(id));
          }
        }
      }
    }
  }
};

/// Parses "<behavior> [args]" as used after `compromise <id>`.
inline Behavior parse_behavior(std::istream& in) {
  std::string name;
  if (!(in >> name)) throw Error(Errc::scenario_invalid, "missing behaviour");
  Behavior b;
  if (name == "forge_own" || name == "forge_children") {
    b.kind = name == "forge_own" ? BehaviorKind::forge_own : BehaviorKind::forge_children;
    if (!(in >> b.delta)) throw Error(Errc::scenario_invalid, name + " needs a delta");
    std::string opt;
    if (in >> opt) {
      if (opt != "dual" || b.kind != BehaviorKind::forge_children) {
        throw Error(Errc::scenario_invalid, "unexpected option '" + opt + "'");
      }
      b.dual = true;
    }
  } else if (name == "noncommit") {
    b.kind = BehaviorKind::noncommit;
  } else if (name == "replay") {
    b.kind = BehaviorKind::replay;
    std::string opt;
    if (in >> opt) {
      if (opt != "fresh") throw Error(Errc::scenario_invalid, "unexpected option '" + opt + "'");
      b.fresh = true;
    }
  } else if (name == "drop_child") {
    b.kind = BehaviorKind::drop_child;
    long long c = -1;
    if (!(in >> c) || c <= 0) throw Error(Errc::scenario_invalid, "drop_child needs a child id");
    b.target = static_cast<NodeId>(c);
  } else {
    throw Error(Errc::scenario_invalid, "unknown behaviour '" + name + "'");
  }
  std::string extra;
  if (in >> extra) throw Error(Errc::scenario_invalid, "trailing token '" + extra + "'");
  return b;
}

inline std::string format_behavior(const Behavior& b) {
  std::ostringstream out;
  out << behavior_name(b.kind);
  switch (b.kind) {
    case BehaviorKind::forge_own: out << ' ' << b.delta; break;
    case BehaviorKind::forge_children: out << ' ' << b.delta << (b.dual ? " dual" : ""); break;
    case BehaviorKind::replay: out << (b.fresh ? " fresh" : ""); break;
    case BehaviorKind::drop_child: out << ' ' << b.target; break;
    case BehaviorKind::noncommit: break;
  }
  return out.str();
}

// ---- behaviour installers ----

/// Adds delta to the node's emitted K-chain sum only (or both chains when
/// `dual`), leaving its MAC consistent with what it sends.
inline void forge_children(SensorNode& node, DomainValue delta, bool dual = false) {
  auto& c = node.compromise_mut();
  c.forge_children = delta;
  c.dual_forgery = dual;
}

/// Shifts the node's own reading before diffusion, consistently on both chains.
inline void forge_own(SensorNode& node, DomainValue delta) { node.compromise_mut().forge_own = delta; }

/// Makes the node answer attestation probes with an altered pair.
inline void noncommit(SensorNode& node) { node.compromise_mut().noncommit = true; }

/// Makes the node resend its previous round's packet instead of a fresh one.
inline void replay(SensorNode& node, ReplayMode mode) { node.compromise_mut().replay = mode; }

inline void drop_child(SensorNode& node, NodeId child) { node.compromise_mut().drop_children.insert(child); }

inline void apply_behavior(SensorNode& node, const Behavior& b, const DomainParams& domain) {
  switch (b.kind) {
    case BehaviorKind::forge_own: forge_own(node, domain.delta(b.delta)); break;
    case BehaviorKind::forge_children: forge_children(node, domain.delta(b.delta), b.dual); break;
    case BehaviorKind::noncommit: noncommit(node); break;
    case BehaviorKind::replay: replay(node, b.fresh ? ReplayMode::fresh_counter : ReplayMode::stale_counter); break;
    case BehaviorKind::drop_child: drop_child(node, b.target); break;
  }
}

/// Installs the plan on `nodes` (indexed by id). Called at setup only.
inline void apply_plan(const AttackPlan& plan, std::vector<SensorNode>& nodes, const DomainParams& domain) {
  for (const auto& [id, list] : plan.behaviors) {
    auto& node = nodes.at(id);
    node.compromise_mut().trigger_round = plan.trigger_round;
    for (const auto& b : list) apply_behavior(node, b, domain);
  }
}

// ---- passive secrecy experiment ----

struct SecrecyResult {
  std::uint64_t trials = 0;
  // Success rate of each guessing strategy, in the order of `strategy_names`.
  std::array<double, 3> success{};
  static constexpr std::array<const char*, 3> strategy_names{"threshold", "seed-lsb", "seed-drift"};

  double best() const { return *std::max_element(success.begin(), success.end()); }
};

/// An eavesdropper holding edge keys (so it sees diffused values in clear)
/// but no node keys tries to tell which of two readings a node sensed. It
/// also knows the previous round's reading and its diffused value.
inline SecrecyResult secrecy_experiment(std::uint64_t trials, std::uint64_t seed, const DomainParams& domain = {}) {
  std::mt19937_64 rng(seed);
  const std::array<DomainValue, 2> candidates{DomainValue(0), DomainValue(domain.max_raw())};
  std::array<std::uint64_t, 3> wins{};
  for (std::uint64_t t = 0; t < trials; ++t) {
    Key k;
    for (std::size_t i = 0; i < k.bytes.size(); i += 8) {
      auto w = rng();
      for (int b = 0; b < 8; ++b) k.bytes[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
    }
    auto chain = SeedState::start(DomainValue(rng() % (domain.max_raw() + 1)));
    chain.advance_to(k, 1);
    auto known = DomainValue(rng() % (domain.max_raw() + 1));
    auto observed_prev = diffuse(chain.seed, known);
    chain.advance_to(k, 2);
    const unsigned secret = static_cast<unsigned>(rng() & 1);
    auto observed = diffuse(chain.seed, candidates[secret]);
    auto prev_seed = undiffuse(observed_prev, known);

    unsigned g_threshold = observed.residue >= (std::uint64_t{1} << 63) ? 1 : 0;
    unsigned g_lsb = ((undiffuse(observed, candidates[1]).residue ^ prev_seed.residue) & 1) == 0 ? 1 : 0;
    auto drift = [&](unsigned b) {
      auto d = undiffuse(observed, candidates[b]) - prev_seed;
      return std::min(d.residue, (DomainValue(0) - d).residue);
    };
    unsigned g_drift = drift(1) < drift(0) ? 1 : 0;

    wins[0] += g_threshold == secret;
    wins[1] += g_lsb == secret;
    wins[2] += g_drift == secret;
  }
  SecrecyResult r;
  r.trials = trials;
  for (std::size_t i = 0; i < wins.size(); ++i) r.success[i] = static_cast<double>(wins[i]) / static_cast<double>(trials);
  return r;
}

}  // namespace cagg
