#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cagg/crypto.hpp"
#include "cagg/packet.hpp"
#include "cagg/topology.hpp"

namespace cagg {

enum class NodeStatus { alive, unreachable, outlier };

inline const char* status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::alive: return "alive";
    case NodeStatus::unreachable: return "unreachable";
    case NodeStatus::outlier: return "outlier";
  }
  return "?";
}

struct NodeRecord {
  NodeId id = 0;
  Key key;
  Key key_prime;
  DomainValue origin;
  NodeStatus status = NodeStatus::alive;
  std::uint32_t absent_rounds = 0;
  SeedState seeds;
  SeedState seeds_prime;
};

enum class Integrity { passed, attested, rejected };

inline const char* integrity_name(Integrity i) {
  switch (i) {
    case Integrity::passed: return "passed";
    case Integrity::attested: return "attested";
    case Integrity::rejected: return "rejected";
  }
  return "?";
}

struct TranscriptEntry {
  NodeId node = 0;
  bool commitment_ok = false;
  bool ipet_ok = false;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct AttestationReport {
  std::set<NodeId> outliers;       // list_L
  std::set<NodeId> non_committed;  // list_C
  std::uint64_t probes = 0;
  std::vector<TranscriptEntry> transcript;
  std::uint64_t reaggregations = 0;
};

struct QueryResult {
  std::uint64_t round = 0;
  AggFunction function = AggFunction::sum;
  std::optional<double> value;
  DomainValue raw_sum;
  std::vector<NodeId> participants;  // nodes whose data the value covers
  Integrity integrity = Integrity::rejected;
  std::optional<AttestationReport> report;
};

struct FinalPair {
  DomainValue dsum;
  DomainValue dsum_prime;
  std::vector<NodeId> participants;  // list_*, ascending
};

struct IpetVerdict {
  bool equal = false;
  DomainValue sum;
};

/// Carries a probe to a node and brings its reply back. Returns nullopt if
/// the node stays silent.
class ProbeTransport {
 public:
  virtual ~ProbeTransport() = default;
  virtual std::optional<Bytes> request(NodeId target, ByteView probe) = 0;
};

/// Component-wise ring sum and participant union over the BS's children.
inline FinalPair finalize(std::span<const AggPacket> children_packets) {
  FinalPair out;
  for (const auto& p : children_packets) {
    out.dsum += p.dsum;
    out.dsum_prime += p.dsum_prime;
    out.participants.insert(out.participants.end(), p.participants.begin(), p.participants.end());
  }
  std::sort(out.participants.begin(), out.participants.end());
  auto dup = std::adjacent_find(out.participants.begin(), out.participants.end());
  if (dup != out.participants.end()) {
    throw Error(Errc::duplicate_participant, "node " + std::to_string(*dup) + " listed by two children");
  }
  return out;
}

/// Trusted root: registry of every node's keys and origin, query
/// dissemination, integrity verdicts and attestation.
class BaseStation {
 public:
  struct Config {
    DomainParams domain;
    std::uint32_t absent_threshold = 3;
    bool force_attest = false;
    double audit_probability = 0.0;
    std::uint64_t audit_seed = 0;
  };

  BaseStation(const Tree& tree, const Provisioning& prov, Config cfg)
      : tree_(tree), cfg_(cfg), audit_rng_(cfg.audit_seed) {
    registry_.resize(tree.vertex_count());
    for (NodeId id = 1; id < tree.vertex_count(); ++id) {
      auto& r = registry_[id];
      const auto& s = prov.nodes.at(id);
      r.id = id;
      r.key = s.key;
      r.key_prime = s.key_prime;
      r.origin = s.origin;
      r.seeds = SeedState::start(s.origin);
      r.seeds_prime = SeedState::start(s.origin);
      direct_rx_.emplace(id, ChannelReceiver(bs_direct_key(s.key)));
    }
    for (NodeId c : tree.children(kBaseStation)) child_rx_.emplace(c, ChannelReceiver(prov.edge_key(c)));
  }

  const Tree& tree() const { return tree_; }
  const Config& config() const { return cfg_; }
  const NodeRecord& record(NodeId id) const { return registry_.at(id); }
  std::size_t registered() const { return registry_.size() - 1; }
  std::uint64_t current_round() const { return round_; }
  AggFunction current_function() const { return function_; }

  std::uint64_t seed_regenerations() const { return seed_regens_; }
  std::uint64_t verify_ops() const { return verify_ops_; }
  const std::vector<ChildFault>& faults() const { return faults_; }
  const std::vector<AggPacket>& children_packets() const { return packets_; }

  /// Opens a round: advances every registry seed chain and the maintained
  /// seed totals, and returns the query for the BS's children.
  Query disseminate(AggFunction function, std::uint64_t round) {
    if (round <= round_) throw Error(Errc::stale_round, "round " + std::to_string(round) + " already issued");
    round_ = round;
    function_ = function;
    seed_total_ = {};
    seed_total_prime_ = {};
    for (NodeId id = 1; id < registry_.size(); ++id) {
      auto& r = registry_[id];
      seed_regens_ += r.seeds.advance_to(r.key, round);
      seed_regens_ += r.seeds_prime.advance_to(r.key_prime, round);
      seed_total_ += r.seeds.seed;
      seed_total_prime_ += r.seeds_prime.seed;
    }
    packets_.clear();
    return Query{round, function};
  }

  /// Accepts a packet from an immediate child. Faults are logged and the
  /// child's subtree is left out of the round.
  std::optional<Errc> receive_child_packet(NodeId from, ByteView wire) {
    auto rx = child_rx_.find(from);
    if (rx == child_rx_.end()) return fault(from, Errc::unknown_child);
    try {
      auto w = parse_packet(wire);
      if (w.sender != from) return fault(from, Errc::unknown_child);
      auto p = open_packet(w, rx->second);
      for (NodeId x : p.participants) {
        if (x == kBaseStation || x >= registry_.size()) return fault(from, Errc::unknown_participant);
      }
      for (const auto& q : packets_) {
        if (q.sender == from) return fault(from, Errc::replay_detected);
      }
      packets_.push_back(std::move(p));
      return std::nullopt;
    } catch (const Error& e) {
      return fault(from, e.code());
    }
  }

  /// IPET with every participant's seeds regenerated from the registry.
  IpetVerdict ipet_check(DomainValue dsum, DomainValue dsum_prime, std::span<const NodeId> participants,
                         std::uint64_t round) {
    DomainValue seeds, seeds_prime;
    for (NodeId id : participants) {
      if (id == kBaseStation || id >= registry_.size()) {
        throw Error(Errc::unknown_participant, "node " + std::to_string(id) + " has no registry record");
      }
      const auto& r = registry_[id];
      if (round == r.seeds.round) {
        seeds += r.seeds.seed;
        seeds_prime += r.seeds_prime.seed;
      } else {
        seeds += seed_at(r.key, r.origin, round);
        seeds_prime += seed_at(r.key_prime, r.origin, round);
        seed_regens_ += 2 * round;
      }
    }
    auto sum = undiffuse(dsum, seeds);
    auto sum_prime = undiffuse(dsum_prime, seeds_prime);
    return {sum == sum_prime, sum};
  }

  /// Final-pair verdict from the maintained seed totals: O(absent) ring ops
  /// plus one comparison. Participants must already be validated.
  IpetVerdict verify_final(const FinalPair& fp) {
    auto seeds = seed_total_;
    auto seeds_prime = seed_total_prime_;
    std::uint64_t ops = 0;
    if (fp.participants.size() != registered()) {
      auto it = fp.participants.begin();
      for (NodeId id = 1; id < registry_.size(); ++id) {
        if (it != fp.participants.end() && *it == id) {
          ++it;
          continue;
        }
        seeds -= registry_[id].seeds.seed;
        seeds_prime -= registry_[id].seeds_prime.seed;
        ops += 2;
      }
    }
    auto sum = undiffuse(fp.dsum, seeds);
    auto sum_prime = undiffuse(fp.dsum_prime, seeds_prime);
    bool equal = sum == sum_prime;
    ops += 3;
    verify_ops_ += ops;
    last_verify_ops_ = ops;
    return {equal, sum};
  }

  std::uint64_t last_verify_ops() const { return last_verify_ops_; }

  /// Divide-and-conquer commitment and attestation over the round's tree.
  AttestationReport com_att(std::uint64_t round, std::span<const AggPacket> children_packets,
                            ProbeTransport& transport) {
    cleared_.clear();
    passed_.clear();
    AttestationReport rep;
    std::vector<NodeId> outlier_order;
    std::set<NodeId> list_l;
    std::set<NodeId> list_star;
    std::map<NodeId, MacTag> original_tag;
    std::deque<NodeId> queue;

    std::vector<const AggPacket*> top;
    for (const auto& p : children_packets) top.push_back(&p);
    std::sort(top.begin(), top.end(), [](auto* a, auto* b) { return a->sender < b->sender; });
    for (const auto* p : top) {
      list_star.insert(p->participants.begin(), p->participants.end());
      original_tag[p->sender] = p->tag;
      queue.push_back(p->sender);
    }
    std::map<NodeId, const AggPacket*> top_by_id;
    for (const auto* p : top) top_by_id[p->sender] = p;

    while (!queue.empty()) {
      NodeId s = queue.front();
      queue.pop_front();
      ++rep.probes;
      auto raw = transport.request(s, encode_probe(Probe{round, ProbeKind::resend, {}}));
      if (!raw) {
        rep.transcript.push_back({s, false, false});
        rep.non_committed.insert(s);
        if (list_l.insert(s).second) outlier_order.push_back(s);
        registry_[s].status = NodeStatus::unreachable;
        continue;
      }
      std::optional<AttestationReply> reply = decode_reply(s, *raw);
      bool commit_ok = reply && commitment_holds(s, *reply, original_tag, top_by_id);
      bool ipet_ok = false;
      if (reply && participants_plausible(s, reply->packet.participants)) {
        ipet_ok = ipet_check(reply->packet.dsum, reply->packet.dsum_prime, reply->packet.participants, round).equal;
      }
      rep.transcript.push_back({s, commit_ok, ipet_ok});
      if (commit_ok && ipet_ok) {
        if (tree_.parent(s) == kBaseStation) passed_.insert(s);
        continue;
      }
      if (!commit_ok) rep.non_committed.insert(s);
      if (list_l.insert(s).second) outlier_order.push_back(s);
      for (NodeId c : tree_.children(s)) {
        if (!list_star.contains(c)) continue;
        MacTag t;
        if (reply) {
          for (const auto& ct : reply->child_tags) {
            if (ct.child == c) t = ct.tag;
          }
        }
        original_tag[c] = t;
        queue.push_back(c);
      }
    }

    // Committed outliers get one chance to re-aggregate over their honest part.
    for (NodeId s : outlier_order) {
      if (rep.non_committed.contains(s) || !list_l.contains(s)) continue;
      std::set<NodeId> exclusions = list_l;
      exclusions.erase(s);
      for (std::size_t attempt = 0; attempt <= tree_.children(s).size(); ++attempt) {
        Probe probe{round, ProbeKind::reaggregate, {exclusions.begin(), exclusions.end()}};
        ++rep.reaggregations;
        auto raw = transport.request(s, encode_probe(probe));
        if (!raw) break;
        ProbeReply pr;
        try {
          pr = decode_probe_reply(*raw);
        } catch (const Error&) {
          break;
        }
        if (pr.status == ReplyStatus::exclusion_not_resolvable) {
          if (tree_.parent(pr.blocking_child) != s || !exclusions.insert(pr.blocking_child).second) break;
          continue;
        }
        if (pr.status != ReplyStatus::ok) break;
        auto pkt = open_direct(s, pr.packet);
        if (!pkt || !participants_plausible(s, pkt->participants)) break;
        bool overlaps = std::any_of(pkt->participants.begin(), pkt->participants.end(),
                                    [&](NodeId x) { return exclusions.contains(x); });
        if (overlaps) break;
        if (ipet_check(pkt->dsum, pkt->dsum_prime, pkt->participants, round).equal) {
          list_l.erase(s);
          cleared_.emplace(s, *pkt);
        }
        break;
      }
    }
    rep.outliers = std::move(list_l);
    return rep;
  }

  /// Registry nodes missing from list_*. Nodes absent for `absent_threshold`
  /// consecutive rounds become unreachable; outlier status takes precedence.
  std::set<NodeId> monitor(std::span<const NodeId> list_star) {
    std::set<NodeId> present(list_star.begin(), list_star.end());
    std::set<NodeId> absent;
    for (NodeId id = 1; id < registry_.size(); ++id) {
      auto& r = registry_[id];
      if (present.contains(id)) {
        r.absent_rounds = 0;
        if (r.status == NodeStatus::unreachable) r.status = NodeStatus::alive;
        continue;
      }
      absent.insert(id);
      ++r.absent_rounds;
      if (r.absent_rounds >= cfg_.absent_threshold && r.status != NodeStatus::outlier) {
        r.status = NodeStatus::unreachable;
      }
    }
    return absent;
  }

  void mark_outliers(const std::set<NodeId>& outliers) {
    for (NodeId id : outliers) {
      if (id != kBaseStation && id < registry_.size()) registry_[id].status = NodeStatus::outlier;
    }
  }

  /// Closes the current round from the packets received so far: final pair,
  /// IPET, and attestation when the check fails or is forced.
  QueryResult conclude_round(ProbeTransport& transport) {
    QueryResult res;
    res.round = round_;
    res.function = function_;

    bool first_ok = false;
    std::optional<FinalPair> fp;
    try {
      fp = finalize(packets_);
    } catch (const Error& e) {
      if (e.code() != Errc::duplicate_participant) throw;
    }
    if (fp) {
      auto v = verify_final(*fp);
      first_ok = v.equal;
      if (first_ok) {
        res.raw_sum = v.sum;
        res.participants = fp->participants;
      }
    }
    bool audit = cfg_.audit_probability > 0.0 &&
                 static_cast<double>(audit_rng_() >> 11) * 0x1.0p-53 < cfg_.audit_probability;

    if (first_ok && !cfg_.force_attest && !audit) {
      res.integrity = Integrity::passed;
    } else {
      auto report = com_att(round_, packets_, transport);
      mark_outliers(report.outliers);
      if (first_ok && report.outliers.empty()) {
        res.integrity = Integrity::passed;
      } else {
        recombine(res, report);
      }
      res.report = std::move(report);
    }
    bool has_value = res.integrity != Integrity::rejected &&
                     !(function_ == AggFunction::mean && res.participants.empty());
    if (has_value) res.value = decode_value(res);
    monitor(fp ? std::span<const NodeId>(fp->participants) : std::span<const NodeId>(res.participants));
    return res;
  }

  double decode_value(const QueryResult& r) const {
    double sum = cfg_.domain.decode_sum(r.raw_sum, r.participants.size());
    if (r.function == AggFunction::mean) return mean(r);
    return sum;
  }

  /// SUM divided by the participant count, in reading units.
  double mean(const QueryResult& r) const {
    if (r.integrity == Integrity::rejected) throw Error(Errc::empty_participants, "rejected result has no value");
    if (r.participants.empty()) throw Error(Errc::empty_participants, "no participants");
    return cfg_.domain.decode_sum(r.raw_sum, r.participants.size()) / static_cast<double>(r.participants.size());
  }

 private:
  std::optional<Errc> fault(NodeId from, Errc e) {
    faults_.push_back({round_, from, e});
    return e;
  }

  std::optional<AggPacket> open_direct(NodeId s, ByteView wire) {
    try {
      auto w = parse_packet(wire);
      if (w.sender != s) return std::nullopt;
      return open_packet(w, direct_rx_.at(s));
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::optional<AttestationReply> decode_reply(NodeId s, ByteView raw) {
    try {
      auto pr = decode_probe_reply(raw);
      if (pr.status != ReplyStatus::ok) return std::nullopt;
      auto pkt = open_direct(s, pr.packet);
      if (!pkt) return std::nullopt;
      return AttestationReply{std::move(*pkt), std::move(pr.child_tags)};
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  bool participants_plausible(NodeId s, const std::vector<NodeId>& participants) const {
    if (!std::binary_search(participants.begin(), participants.end(), s)) return false;
    for (NodeId x : participants) {
      if (x == kBaseStation || x >= registry_.size()) return false;
      if (x != s && !tree_.is_ancestor(s, x)) return false;
    }
    return true;
  }

  // MAC^Calc = MAC(K_s, resent pair) XOR retained child tags, compared with
  // the tag isolated for s one level up.
  bool commitment_holds(NodeId s, const AttestationReply& r, const std::map<NodeId, MacTag>& original_tag,
                        const std::map<NodeId, const AggPacket*>& top) const {
    const auto& p = r.packet;
    if (p.sender != s) return false;
    auto orig = original_tag.find(s);
    if (orig == original_tag.end() || p.tag != orig->second) return false;
    if (auto t = top.find(s); t != top.end() && t->second->participants != p.participants) return false;

    std::vector<NodeId> expected;
    for (NodeId c : tree_.children(s)) {
      if (std::binary_search(p.participants.begin(), p.participants.end(), c)) expected.push_back(c);
    }
    if (r.child_tags.size() != expected.size()) return false;
    MacTag calc = mac_pair(registry_[s].key, p.dsum, p.dsum_prime);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (r.child_tags[i].child != expected[i]) return false;
      calc ^= r.child_tags[i].tag;
    }
    return calc == orig->second;
  }

  // Value after attestation: depth-1 children that passed contribute their
  // original pair, cleared ones their re-aggregated pair, outliers nothing.
  void recombine(QueryResult& res, const AttestationReport& report) {
    DomainValue dsum, dsum_prime;
    std::vector<NodeId> participants;
    for (const auto& p : packets_) {
      const AggPacket* use = nullptr;
      if (passed_.contains(p.sender)) {
        use = &p;
      } else if (auto c = cleared_.find(p.sender); c != cleared_.end() && !report.outliers.contains(p.sender)) {
        use = &c->second;
      }
      if (!use) continue;
      dsum += use->dsum;
      dsum_prime += use->dsum_prime;
      participants.insert(participants.end(), use->participants.begin(), use->participants.end());
    }
    std::sort(participants.begin(), participants.end());
    auto v = ipet_check(dsum, dsum_prime, participants, round_);
    if (v.equal && std::adjacent_find(participants.begin(), participants.end()) == participants.end()) {
      res.integrity = Integrity::attested;
      res.raw_sum = v.sum;
      res.participants = std::move(participants);
    } else {
      res.integrity = Integrity::rejected;
      res.participants.clear();
      res.raw_sum = {};
    }
  }

  Tree tree_;
  Config cfg_;
  std::mt19937_64 audit_rng_;
  std::vector<NodeRecord> registry_;
  std::map<NodeId, ChannelReceiver> child_rx_;
  std::map<NodeId, ChannelReceiver> direct_rx_;
  std::vector<AggPacket> packets_;
  std::vector<ChildFault> faults_;
  std::map<NodeId, AggPacket> cleared_;
  std::set<NodeId> passed_;
  std::uint64_t round_ = 0;
  AggFunction function_ = AggFunction::sum;
  DomainValue seed_total_;
  DomainValue seed_total_prime_;
  std::uint64_t seed_regens_ = 0;
  std::uint64_t verify_ops_ = 0;
  std::uint64_t last_verify_ops_ = 0;
};

}  // namespace cagg
