#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cagg/crypto.hpp"
#include "cagg/packet.hpp"
#include "cagg/topology.hpp"

namespace cagg {

enum class ReplayMode { stale_counter, fresh_counter };

/// Behaviour overrides installed on a compromised node. Everything is inert
/// before `trigger_round`.
struct Compromise {
  std::uint64_t trigger_round = 1;
  std::optional<DomainValue> forge_own;       // added to the sensed reading
  std::optional<DomainValue> forge_children;  // added to the emitted K-chain sum
  bool dual_forgery = false;                  // also add forge_children to the K'-chain sum
  bool noncommit = false;
  std::optional<ReplayMode> replay;
  std::set<NodeId> drop_children;

  bool active(std::uint64_t round) const { return round >= trigger_round; }
};

/// Thrown by reaggregate_excluding when an excluded node sits below a child
/// that is not itself excluded.
class ExclusionNotResolvable : public Error {
 public:
  ExclusionNotResolvable(NodeId blocking_child, const std::string& what)
      : Error(Errc::exclusion_not_resolvable, what), blocking_child_(blocking_child) {}

  NodeId blocking_child() const { return blocking_child_; }

 private:
  NodeId blocking_child_;
};

struct ChildFault {
  std::uint64_t round = 0;
  NodeId child = 0;
  Errc error = Errc::unknown_child;
};

struct RoundState {
  std::uint64_t round = 0;
  AggFunction function = AggFunction::sum;
  DomainValue own_reading;  // as sensed (after any forge_own override)
  DomainValue own_dsum;
  DomainValue own_dsum_prime;
  std::set<NodeId> pending_children;
  std::set<NodeId> absent_children;  // timed out, faulted or dropped
  DomainValue dsum;
  DomainValue dsum_prime;
  MacTag child_tags;  // XOR of accepted child tags
  std::set<NodeId> participants;
  std::map<NodeId, AggPacket> child_packets;
  std::optional<AggPacket> last_emitted;
};

/// Sensor/aggregator state machine. One instance per node, driven by a
/// single thread; all interaction is through the message methods.
class SensorNode {
 public:
  /// Supplies the (encoded) reading for a round.
  using Sensor = std::function<DomainValue(std::uint64_t round)>;

  struct Config {
    NodeId id = 0;
    NodeId parent = kBaseStation;
    std::vector<NodeId> children;
    NodeSecrets secrets;
    Key uplink_key;                  // edge key shared with the parent
    std::map<NodeId, Key> child_keys;  // edge key per child
    DomainParams domain;
    std::uint32_t timeout_ticks = 10;
  };

  struct Diffused {
    DomainValue dsum;
    DomainValue dsum_prime;
    MacTag tag;
  };

  struct Emission {
    AggPacket packet;
    Bytes wire;  // packet serialisation (no envelope)
  };

  SensorNode(Config cfg, Sensor sensor)
      : cfg_(std::move(cfg)),
        sensor_(std::move(sensor)),
        seeds_(SeedState::start(cfg_.secrets.origin)),
        seeds_prime_(SeedState::start(cfg_.secrets.origin)),
        uplink_(cfg_.uplink_key),
        bs_direct_(bs_direct_key(cfg_.secrets.key)) {
    std::sort(cfg_.children.begin(), cfg_.children.end());
    for (NodeId c : cfg_.children) child_rx_.emplace(c, ChannelReceiver(cfg_.child_keys.at(c)));
  }

  NodeId id() const { return cfg_.id; }
  NodeId parent() const { return cfg_.parent; }
  const std::vector<NodeId>& children() const { return cfg_.children; }
  const Config& config() const { return cfg_; }
  std::uint64_t last_round() const { return last_round_; }
  const std::optional<RoundState>& round_state() const { return state_; }
  const std::vector<ChildFault>& faults() const { return faults_; }
  const SeedState& seeds() const { return seeds_; }
  const SeedState& seeds_prime() const { return seeds_prime_; }

  void set_compromise(Compromise c) { compromise_ = std::move(c); }
  const std::optional<Compromise>& compromise() const { return compromise_; }
  Compromise& compromise_mut() {
    if (!compromise_) compromise_.emplace();
    return *compromise_;
  }

  /// Starts a round. Returns the children the query must be relayed to.
  std::vector<NodeId> handle_query(const Query& q) {
    if (q.round <= last_round_) {
      throw Error(Errc::stale_round, "node " + std::to_string(cfg_.id) + " got round " + std::to_string(q.round) +
                                         " after " + std::to_string(last_round_));
    }
    if (state_ && state_->last_emitted) previous_ = state_->last_emitted;
    last_round_ = q.round;
    seeds_.advance_to(cfg_.secrets.key, q.round);
    seeds_prime_.advance_to(cfg_.secrets.key_prime, q.round);

    RoundState st;
    st.round = q.round;
    st.function = q.function;
    st.own_reading = sensed_reading(q.round);
    st.own_dsum = diffuse(seeds_.seed, st.own_reading);
    st.own_dsum_prime = diffuse(seeds_prime_.seed, st.own_reading);
    st.dsum = st.own_dsum;
    st.dsum_prime = st.own_dsum_prime;
    st.participants.insert(cfg_.id);
    st.pending_children.insert(cfg_.children.begin(), cfg_.children.end());
    state_ = std::move(st);
    return cfg_.children;
  }

  /// Diffuses this round's reading under both chains and MACs the pair.
  Diffused sense_and_diffuse(std::uint64_t round) const {
    if (seeds_.round != round || seeds_prime_.round != round) {
      throw Error(Errc::no_such_round, "seed chains are not at round " + std::to_string(round));
    }
    auto m = sensed_reading(round);
    Diffused d{diffuse(seeds_.seed, m), diffuse(seeds_prime_.seed, m), {}};
    d.tag = mac_pair(cfg_.secrets.key, d.dsum, d.dsum_prime);
    return d;
  }

  /// Opens and folds a child's packet. Failures are logged, the child is
  /// marked absent, and the error code is returned.
  std::optional<Errc> receive_child(NodeId from, ByteView packet_bytes) {
    if (!state_) return log_fault(from, Errc::no_such_round);
    auto rx = child_rx_.find(from);
    if (rx == child_rx_.end()) return log_fault(from, Errc::unknown_child);
    try {
      auto wire = parse_packet(packet_bytes);
      if (wire.sender != from) return log_fault(from, Errc::unknown_child);
      auto pkt = open_packet(wire, rx->second);
      if (compromise_ && compromise_->active(state_->round) && compromise_->drop_children.contains(from)) {
        state_->pending_children.erase(from);
        state_->absent_children.insert(from);
        return std::nullopt;
      }
      aggregate_child(pkt);
      return std::nullopt;
    } catch (const Error& e) {
      return log_fault(from, e.code());
    }
  }

  /// Folds an already opened child packet into the round accumulator.
  void aggregate_child(const AggPacket& p) {
    if (!state_) throw Error(Errc::no_such_round, "no active round");
    if (!state_->pending_children.contains(p.sender) || state_->last_emitted) {
      throw Error(Errc::unknown_child, "node " + std::to_string(p.sender) + " is not a pending child of " +
                                           std::to_string(cfg_.id));
    }
    auto& st = *state_;
    st.dsum += p.dsum;
    st.dsum_prime += p.dsum_prime;
    st.child_tags ^= p.tag;
    st.participants.insert(p.participants.begin(), p.participants.end());
    st.child_packets.emplace(p.sender, p);
    st.pending_children.erase(p.sender);
  }

  bool ready() const { return state_ && !state_->last_emitted && state_->pending_children.empty(); }
  bool emitted() const { return state_ && state_->last_emitted.has_value(); }

  /// Seals the round's aggregate to the parent. Children still pending are
  /// treated as timed out and left out of the participant list.
  Emission emit() {
    if (!state_) throw Error(Errc::no_such_round, "no active round");
    auto& st = *state_;
    if (st.last_emitted) throw Error(Errc::already_emitted, "node " + std::to_string(cfg_.id) + " already emitted round " + std::to_string(st.round));
    for (NodeId c : st.pending_children) {
      st.absent_children.insert(c);
      faults_.push_back({st.round, c, Errc::probe_timeout});
    }
    st.pending_children.clear();

    const bool attacking = compromise_ && compromise_->active(st.round);
    if (attacking && compromise_->replay && previous_) {
      if (compromise_->replay == ReplayMode::stale_counter) {
        st.last_emitted = previous_;
        return {*previous_, encode_packet(*previous_, cfg_.uplink_key)};
      }
      AggPacket p = *previous_;
      p.participants.assign(st.participants.begin(), st.participants.end());
      p.counter = uplink_.next();
      st.last_emitted = p;
      return {p, encode_packet(p, cfg_.uplink_key)};
    }

    AggPacket p;
    p.sender = cfg_.id;
    p.participants.assign(st.participants.begin(), st.participants.end());
    p.dsum = st.dsum;
    p.dsum_prime = st.dsum_prime;
    forge_aggregate(p);
    p.tag = mac_pair(cfg_.secrets.key, p.dsum, p.dsum_prime) ^ st.child_tags;
    p.counter = uplink_.next();
    st.last_emitted = p;
    return {p, encode_packet(p, cfg_.uplink_key)};
  }

  /// Resends the committed packet (and retained child tags) for `round`.
  AttestationReply respond_attestation(std::uint64_t round) {
    auto& st = committed_round(round);
    AttestationReply rep;
    rep.packet = *st.last_emitted;
    if (compromise_ && compromise_->active(round) && compromise_->noncommit) {
      rep.packet.dsum += DomainValue(1);
      rep.packet.dsum_prime += DomainValue(1);
    }
    for (const auto& [c, pkt] : st.child_packets) rep.child_tags.push_back({c, pkt.tag});
    rep.packet.counter = bs_direct_.next();
    return rep;
  }

  /// Recomputes the round aggregate without the excluded nodes. An excluded
  /// direct child is dropped with its whole subtree.
  AggPacket reaggregate_excluding(const std::set<NodeId>& exclusions, std::uint64_t round) {
    auto& st = committed_round(round);
    AggPacket p;
    p.sender = cfg_.id;
    const bool attacking = compromise_ && compromise_->active(round);
    if (attacking && compromise_->replay == ReplayMode::fresh_counter && previous_) {
      p = *previous_;
      p.counter = bs_direct_.next();
      return p;
    }
    std::set<NodeId> participants{cfg_.id};
    p.dsum = st.own_dsum;
    p.dsum_prime = st.own_dsum_prime;
    MacTag tags;
    for (const auto& [c, pkt] : st.child_packets) {
      if (exclusions.contains(c)) continue;
      for (NodeId x : pkt.participants) {
        if (exclusions.contains(x)) {
          throw ExclusionNotResolvable(c, "node " + std::to_string(x) + " is below non-excluded child " +
                                              std::to_string(c) + " of " + std::to_string(cfg_.id));
        }
      }
      p.dsum += pkt.dsum;
      p.dsum_prime += pkt.dsum_prime;
      tags ^= pkt.tag;
      participants.insert(pkt.participants.begin(), pkt.participants.end());
    }
    p.participants.assign(participants.begin(), participants.end());
    forge_aggregate(p);
    p.tag = mac_pair(cfg_.secrets.key, p.dsum, p.dsum_prime) ^ tags;
    p.counter = bs_direct_.next();
    return p;
  }

  /// Wire entry point for base-station probes.
  Bytes handle_probe(ByteView msg) {
    auto probe = decode_probe(msg);
    ProbeReply out;
    try {
      if (probe.kind == ProbeKind::resend) {
        auto rep = respond_attestation(probe.round);
        out.packet = encode_packet(rep.packet, bs_direct_.key());
        out.child_tags = std::move(rep.child_tags);
      } else {
        std::set<NodeId> ex(probe.exclusions.begin(), probe.exclusions.end());
        out.packet = encode_packet(reaggregate_excluding(ex, probe.round), bs_direct_.key());
      }
    } catch (const ExclusionNotResolvable& e) {
      out.status = ReplyStatus::exclusion_not_resolvable;
      out.blocking_child = e.blocking_child();
    } catch (const Error& e) {
      if (e.code() != Errc::no_such_round) throw;
      out.status = ReplyStatus::no_such_round;
    }
    return encode_probe_reply(out);
  }

 private:
  DomainValue sensed_reading(std::uint64_t round) const {
    auto m = sensor_(round);
    if (compromise_ && compromise_->active(round) && compromise_->forge_own) {
      auto forged = m + *compromise_->forge_own;
      // Forged readings outside the sensing range are refused at encoding.
      if (forged.residue <= cfg_.domain.max_raw()) return forged;
    }
    return m;
  }

  void forge_aggregate(AggPacket& p) const {
    if (!compromise_ || !state_ || !compromise_->active(state_->round) || !compromise_->forge_children) return;
    p.dsum += *compromise_->forge_children;
    if (compromise_->dual_forgery) p.dsum_prime += *compromise_->forge_children;
  }

  RoundState& committed_round(std::uint64_t round) {
    if (!state_ || state_->round != round || !state_->last_emitted) {
      throw Error(Errc::no_such_round, "node " + std::to_string(cfg_.id) + " holds no packet for round " +
                                           std::to_string(round));
    }
    return *state_;
  }

  std::optional<Errc> log_fault(NodeId child, Errc e) {
    faults_.push_back({state_ ? state_->round : 0, child, e});
    if (state_ && state_->pending_children.erase(child)) state_->absent_children.insert(child);
    return e;
  }

  Config cfg_;
  Sensor sensor_;
  SeedState seeds_;
  SeedState seeds_prime_;
  ChannelSender uplink_;
  ChannelSender bs_direct_;
  std::map<NodeId, ChannelReceiver> child_rx_;
  std::uint64_t last_round_ = 0;
  std::optional<RoundState> state_;
  std::optional<AggPacket> previous_;
  std::optional<Compromise> compromise_;
  std::vector<ChildFault> faults_;
};

}  // namespace cagg
