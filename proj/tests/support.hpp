#pragma once

// Independent oracles and a hand-driven harness for unit tests. The oracles
// talk to libsodium directly and never call into the library's crypto code.

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "cagg/cagg.hpp"

namespace oracle {

inline std::array<unsigned char, 16> personal(const char* s) {
  std::array<unsigned char, 16> p{};
  for (std::size_t i = 0; s[i] && i < p.size(); ++i) p[i] = static_cast<unsigned char>(s[i]);
  return p;
}

inline void put_be(unsigned char* out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i, v >>= 8) out[i] = static_cast<unsigned char>(v & 0xff);
}

inline std::uint64_t get_be(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | in[i];
  return v;
}

inline std::uint64_t prf_seed(const cagg::Key& k, std::uint64_t prev, std::uint64_t round) {
  if (sodium_init() < 0) std::abort();
  unsigned char in[16];
  put_be(in, prev);
  put_be(in + 8, round);
  unsigned char out[16];
  const unsigned char salt[16] = {};
  auto pers = personal("cagg.ps.seed.v1");
  crypto_generichash_blake2b_salt_personal(out, sizeof out, in, sizeof in, k.bytes.data(), k.bytes.size(), salt,
                                           pers.data());
  return get_be(out);
}

/// Seed of `round` by walking the chain from the origin.
inline std::uint64_t seed(const cagg::Key& k, std::uint64_t origin, std::uint64_t round) {
  std::uint64_t s = origin;
  for (std::uint64_t j = 1; j <= round; ++j) s = prf_seed(k, s, j);
  return s;
}

inline cagg::MacTag mac_pair(const cagg::Key& k, std::uint64_t a, std::uint64_t b) {
  if (sodium_init() < 0) std::abort();
  unsigned char in[16];
  put_be(in, a);
  put_be(in + 8, b);
  unsigned char out[16];
  const unsigned char salt[16] = {};
  auto pers = personal("cagg.mac.v1");
  crypto_generichash_blake2b_salt_personal(out, sizeof out, in, sizeof in, k.bytes.data(), k.bytes.size(), salt,
                                           pers.data());
  cagg::MacTag t;
  std::copy_n(out, 8, t.bytes.begin());
  return t;
}

inline std::uint64_t plaintext_sum(const std::vector<std::uint64_t>& readings) {
  std::uint64_t s = 0;
  for (auto r : readings) s += r;
  return s;
}

/// Distances by repeated relaxation, then each node takes the smallest-id
/// neighbour one hop closer to the root.
inline std::vector<cagg::NodeId> bfs_parents(const cagg::Graph& g) {
  const auto n = g.vertex_count();
  constexpr std::size_t inf = ~std::size_t{0};
  std::vector<std::size_t> dist(n, inf);
  dist[0] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (cagg::NodeId v = 0; v < n; ++v) {
      for (auto u : g.neighbors(v)) {
        if (dist[u] != inf && dist[u] + 1 < dist[v]) {
          dist[v] = dist[u] + 1;
          changed = true;
        }
      }
    }
  }
  std::vector<cagg::NodeId> parent(n, 0);
  for (cagg::NodeId v = 1; v < n; ++v) {
    cagg::NodeId best = ~cagg::NodeId{0};
    for (auto u : g.neighbors(v)) {
      if (dist[u] + 1 == dist[v]) best = std::min(best, u);
    }
    parent[v] = best;
  }
  return parent;
}

}  // namespace oracle

namespace harness {

inline cagg::Key random_key(std::mt19937_64& rng) {
  cagg::Key k;
  for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
  return k;
}

/// A network driven directly through node methods, without the event loop.
struct Net {
  cagg::Tree tree;
  cagg::Provisioning prov;
  std::vector<std::uint64_t> readings;  // per id, raw; index 0 unused
  std::vector<cagg::SensorNode> nodes;
  cagg::DomainParams domain;

  Net(cagg::Tree t, std::uint64_t seed, std::vector<std::uint64_t> r = {}, cagg::DomainParams d = {})
      : tree(std::move(t)), prov(cagg::provision(tree, seed, d)), readings(std::move(r)), domain(d) {
    if (readings.empty()) {
      std::mt19937_64 rng(seed ^ 0x5eedULL);
      readings.resize(tree.vertex_count());
      for (std::size_t i = 1; i < readings.size(); ++i) readings[i] = rng() % (domain.max_raw() + 1);
    }
    for (cagg::NodeId id = 0; id < tree.vertex_count(); ++id) {
      cagg::SensorNode::Config cfg;
      cfg.id = id;
      cfg.parent = tree.parent(id);
      cfg.children = tree.children(id);
      cfg.domain = domain;
      for (auto c : cfg.children) cfg.child_keys[c] = prov.edge_key(c);
      if (id != cagg::kBaseStation) {
        cfg.secrets = prov.nodes[id];
        cfg.uplink_key = prov.edge_key(id);
      }
      auto value = readings[id];
      nodes.emplace_back(std::move(cfg), [value](std::uint64_t) { return cagg::DomainValue(value); });
    }
  }

  std::uint64_t sum_of(const std::vector<cagg::NodeId>& ids) const {
    std::vector<std::uint64_t> r;
    for (auto id : ids) r.push_back(readings[id]);
    return oracle::plaintext_sum(r);
  }

  /// Runs a round bottom-up. Returns the BS children's wire packets, in
  /// ascending sender order.
  std::vector<std::pair<cagg::NodeId, cagg::Bytes>> aggregate(std::uint64_t round,
                                                             cagg::AggFunction f = cagg::AggFunction::sum) {
    std::vector<cagg::NodeId> order{cagg::kBaseStation};
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (auto c : tree.children(order[i])) order.push_back(c);
    }
    for (std::size_t i = 1; i < order.size(); ++i) nodes[order[i]].handle_query({round, f});
    std::vector<std::pair<cagg::NodeId, cagg::Bytes>> top;
    for (std::size_t i = order.size(); i-- > 1;) {
      auto id = order[i];
      auto e = nodes[id].emit();
      auto p = tree.parent(id);
      if (p == cagg::kBaseStation) {
        top.emplace_back(id, std::move(e.wire));
      } else {
        nodes[p].receive_child(id, e.wire);
      }
    }
    std::sort(top.begin(), top.end());
    return top;
  }
};

/// Probe transport calling the node objects directly, optionally silencing some.
class DirectTransport : public cagg::ProbeTransport {
 public:
  explicit DirectTransport(std::vector<cagg::SensorNode>& nodes, std::set<cagg::NodeId> silent = {})
      : nodes_(nodes), silent_(std::move(silent)) {}

  std::optional<cagg::Bytes> request(cagg::NodeId target, cagg::ByteView probe) override {
    ++requests;
    probed.push_back(target);
    if (silent_.contains(target)) return std::nullopt;
    return nodes_[target].handle_probe(probe);
  }

  std::size_t requests = 0;
  std::vector<cagg::NodeId> probed;

 private:
  std::vector<cagg::SensorNode>& nodes_;
  std::set<cagg::NodeId> silent_;
};

inline cagg::Tree tree_of(std::vector<cagg::NodeId> parents) { return cagg::Tree::from_parents(std::move(parents)); }

}  // namespace harness
