#pragma once

// Wire formats. Every integer is big-endian.
//
//   AggPacket : sender(4) | counter(8) | n(4) | ids(4*n, sorted) | sealed(32) | tag(8)
//               sealed = AEAD(dsum(8) | dsum'(8)) under the channel key
//   envelope  : type(1) | body

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cagg/bytes.hpp"
#include "cagg/crypto.hpp"
#include "cagg/topology.hpp"

namespace cagg {

enum class AggFunction : std::uint8_t { sum = 0, mean = 1 };

inline const char* function_name(AggFunction f) { return f == AggFunction::sum ? "sum" : "mean"; }

struct AggPacket {
  NodeId sender = 0;
  std::vector<NodeId> participants;  // sorted, contains sender
  std::uint64_t counter = 0;
  DomainValue dsum;
  DomainValue dsum_prime;
  MacTag tag;

  friend bool operator==(const AggPacket&, const AggPacket&) = default;
};

inline constexpr std::size_t kSealedPairSize = 16 + kSealOverhead;

inline Bytes encode_pair(DomainValue dsum, DomainValue dsum_prime) {
  return ByteWriter{}.u64(dsum.residue).u64(dsum_prime.residue).take();
}

/// Serialises `p` with its pair sealed under `channel_key` at `p.counter`.
inline Bytes encode_packet(const AggPacket& p, const Key& channel_key) {
  ByteWriter w;
  w.u32(p.sender).u64(p.counter).u32(static_cast<std::uint32_t>(p.participants.size()));
  for (NodeId id : p.participants) w.u32(id);
  w.raw(seal(channel_key, p.counter, encode_pair(p.dsum, p.dsum_prime)));
  w.raw(p.tag.bytes);
  return w.take();
}

/// Packet as read off the wire, before the sealed pair is opened.
struct WirePacket {
  NodeId sender = 0;
  std::uint64_t counter = 0;
  std::vector<NodeId> participants;
  Bytes sealed;
  MacTag tag;
};

inline WirePacket parse_packet(ByteReader& r) {
  WirePacket w;
  w.sender = r.u32();
  w.counter = r.u64();
  auto n = r.u32();
  if (n > r.remaining() / 4) throw Error(Errc::malformed_message, "participant count exceeds message");
  w.participants.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) w.participants.push_back(r.u32());
  if (!std::is_sorted(w.participants.begin(), w.participants.end()) ||
      std::adjacent_find(w.participants.begin(), w.participants.end()) != w.participants.end()) {
    throw Error(Errc::malformed_message, "participant list not strictly ascending");
  }
  auto sealed = r.raw(kSealedPairSize);
  w.sealed.assign(sealed.begin(), sealed.end());
  auto tag = r.raw(8);
  std::copy(tag.begin(), tag.end(), w.tag.bytes.begin());
  return w;
}

inline WirePacket parse_packet(ByteView bytes) {
  ByteReader r(bytes);
  auto w = parse_packet(r);
  if (!r.done()) throw Error(Errc::malformed_message, "trailing bytes after packet");
  return w;
}

/// Opens the sealed pair through `rx` (replay + authenticity checks).
inline AggPacket open_packet(const WirePacket& w, ChannelReceiver& rx) {
  auto plain = rx.open(w.counter, w.sealed);
  ByteReader r(plain);
  AggPacket p;
  p.sender = w.sender;
  p.counter = w.counter;
  p.participants = w.participants;
  p.dsum = DomainValue(r.u64());
  p.dsum_prime = DomainValue(r.u64());
  p.tag = w.tag;
  return p;
}

// ---- envelopes ----

enum class MsgType : std::uint8_t { query = 1, packet = 2, probe = 3, probe_reply = 4, timer = 5 };

struct Query {
  std::uint64_t round = 0;
  AggFunction function = AggFunction::sum;

  friend bool operator==(const Query&, const Query&) = default;
};

enum class ProbeKind : std::uint8_t { resend = 0, reaggregate = 1 };

struct Probe {
  std::uint64_t round = 0;
  ProbeKind kind = ProbeKind::resend;
  std::vector<NodeId> exclusions;  // sorted; reaggregate only
};

enum class ReplyStatus : std::uint8_t { ok = 0, no_such_round = 1, exclusion_not_resolvable = 2 };

struct ChildTag {
  NodeId child = 0;
  MacTag tag;

  friend bool operator==(const ChildTag&, const ChildTag&) = default;
};

/// A node's answer to a probe: the resent (or re-aggregated) packet plus the
/// tags it retained from its contributing children.
struct AttestationReply {
  AggPacket packet;
  std::vector<ChildTag> child_tags;  // ascending child id
};

struct ProbeReply {
  ReplyStatus status = ReplyStatus::ok;
  NodeId blocking_child = 0;   // exclusion_not_resolvable only
  Bytes packet;                // sealed on the node's BS-direct channel
  std::vector<ChildTag> child_tags;
};

inline MsgType peek_type(ByteView msg) {
  if (msg.empty()) throw Error(Errc::malformed_message, "empty message");
  auto t = msg[0];
  if (t < 1 || t > 5) throw Error(Errc::malformed_message, "unknown message type");
  return static_cast<MsgType>(t);
}

inline Bytes encode_query(const Query& q) {
  return ByteWriter{}.u8(static_cast<std::uint8_t>(MsgType::query)).u64(q.round).u8(static_cast<std::uint8_t>(q.function)).take();
}

inline Query decode_query(ByteView msg) {
  ByteReader r(msg);
  if (r.u8() != static_cast<std::uint8_t>(MsgType::query)) throw Error(Errc::malformed_message, "not a query");
  Query q;
  q.round = r.u64();
  auto f = r.u8();
  if (f > 1) throw Error(Errc::malformed_message, "unknown aggregation function");
  q.function = static_cast<AggFunction>(f);
  return q;
}

inline Bytes wrap_packet(ByteView packet) {
  return ByteWriter{}.u8(static_cast<std::uint8_t>(MsgType::packet)).raw(packet).take();
}

inline ByteView unwrap_packet(ByteView msg) {
  if (peek_type(msg) != MsgType::packet) throw Error(Errc::malformed_message, "not a packet");
  return msg.subspan(1);
}

inline Bytes encode_probe(const Probe& p) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgType::probe)).u64(p.round).u8(static_cast<std::uint8_t>(p.kind));
  w.u32(static_cast<std::uint32_t>(p.exclusions.size()));
  for (NodeId id : p.exclusions) w.u32(id);
  return w.take();
}

inline Probe decode_probe(ByteView msg) {
  ByteReader r(msg);
  if (r.u8() != static_cast<std::uint8_t>(MsgType::probe)) throw Error(Errc::malformed_message, "not a probe");
  Probe p;
  p.round = r.u64();
  auto k = r.u8();
  if (k > 1) throw Error(Errc::malformed_message, "unknown probe kind");
  p.kind = static_cast<ProbeKind>(k);
  auto n = r.u32();
  if (n > r.remaining() / 4) throw Error(Errc::malformed_message, "exclusion count exceeds message");
  for (std::uint32_t i = 0; i < n; ++i) p.exclusions.push_back(r.u32());
  return p;
}

inline Bytes encode_probe_reply(const ProbeReply& rep) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgType::probe_reply)).u8(static_cast<std::uint8_t>(rep.status)).u32(rep.blocking_child);
  w.u32(static_cast<std::uint32_t>(rep.packet.size())).raw(rep.packet);
  w.u32(static_cast<std::uint32_t>(rep.child_tags.size()));
  for (const auto& ct : rep.child_tags) w.u32(ct.child).raw(ct.tag.bytes);
  return w.take();
}

inline ProbeReply decode_probe_reply(ByteView msg) {
  ByteReader r(msg);
  if (r.u8() != static_cast<std::uint8_t>(MsgType::probe_reply)) throw Error(Errc::malformed_message, "not a probe reply");
  ProbeReply rep;
  auto s = r.u8();
  if (s > 2) throw Error(Errc::malformed_message, "unknown reply status");
  rep.status = static_cast<ReplyStatus>(s);
  rep.blocking_child = r.u32();
  auto len = r.u32();
  auto pk = r.raw(len);
  rep.packet.assign(pk.begin(), pk.end());
  auto n = r.u32();
  if (n > r.remaining() / 12) throw Error(Errc::malformed_message, "child tag count exceeds message");
  for (std::uint32_t i = 0; i < n; ++i) {
    ChildTag ct;
    ct.child = r.u32();
    auto t = r.raw(8);
    std::copy(t.begin(), t.end(), ct.tag.bytes.begin());
    rep.child_tags.push_back(ct);
  }
  if (!r.done()) throw Error(Errc::malformed_message, "trailing bytes after probe reply");
  return rep;
}

inline Bytes encode_timer() { return Bytes{static_cast<std::uint8_t>(MsgType::timer)}; }

/// Key of the logical channel a node uses to answer the base station directly.
inline Key bs_direct_key(const Key& node_key) { return derive_key(node_key, "bs-direct"); }

}  // namespace cagg
