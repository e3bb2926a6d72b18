#pragma once

// Seed generator map, additive diffusion, XOR-composable MACs and sealed
// pairwise channels. PRF and MAC are keyed BLAKE2b; channels use
// ChaCha20-Poly1305 (IETF) with the replay counter as nonce.

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>

#include "cagg/bytes.hpp"
#include "cagg/domain.hpp"
#include "cagg/error.hpp"

namespace cagg {

namespace detail {

inline void ensure_sodium() {
  static const bool ok = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ok;
}

// 16-byte BLAKE2b personalisation strings, one per use of a key.
inline constexpr std::array<unsigned char, 16> kPersonalSeed = {'c', 'a', 'g', 'g', '.', 'p', 's', '.',
                                                               's', 'e', 'e', 'd', '.', 'v', '1', 0};
inline constexpr std::array<unsigned char, 16> kPersonalMac = {'c', 'a', 'g', 'g', '.', 'm', 'a', 'c',
                                                              '.', 'v', '1', 0, 0, 0, 0, 0};
inline constexpr std::array<unsigned char, 16> kPersonalSeal = {'c', 'a', 'g', 'g', '.', 's', 'e', 'a',
                                                               'l', '.', 'v', '1', 0, 0, 0, 0};
inline constexpr std::array<unsigned char, 16> kPersonalDerive = {'c', 'a', 'g', 'g', '.', 'k', 'd', 'f',
                                                                 '.', 'v', '1', 0, 0, 0, 0, 0};

inline void keyed_blake2b(std::span<unsigned char> out, ByteView in, std::span<const std::uint8_t> key,
                          const std::array<unsigned char, 16>& personal) {
  ensure_sodium();
  static constexpr std::array<unsigned char, 16> salt{};
  crypto_generichash_blake2b_salt_personal(out.data(), out.size(), in.data(), in.size(), key.data(), key.size(),
                                           salt.data(), personal.data());
}

inline std::uint64_t load_be64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

/// 16-byte symmetric key.
struct Key {
  std::array<std::uint8_t, 16> bytes{};

  friend bool operator==(const Key&, const Key&) = default;
  friend auto operator<=>(const Key&, const Key&) = default;
};

/// 8-byte authentication tag. XOR makes tags an abelian group of exponent 2.
struct MacTag {
  std::array<std::uint8_t, 8> bytes{};

  static MacTag zero() { return {}; }
  bool is_zero() const { return *this == zero(); }

  MacTag& operator^=(const MacTag& o) {
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] ^= o.bytes[i];
    return *this;
  }
  friend MacTag operator^(MacTag a, const MacTag& b) { return a ^= b; }
  friend bool operator==(const MacTag&, const MacTag&) = default;
};

/// One step of the public generator map: D_j = PS(K, D_{j-1}), with the
/// round index bound into the input.
inline DomainValue next_seed(const Key& key, DomainValue prev, std::uint64_t round) {
  auto input = ByteWriter{}.u64(prev.residue).u64(round).take();
  std::array<unsigned char, 16> out{};
  detail::keyed_blake2b(out, input, key.bytes, detail::kPersonalSeed);
  return DomainValue(detail::load_be64(out.data()));
}

inline DomainValue diffuse(DomainValue seed, DomainValue reading) { return seed + reading; }

inline DomainValue undiffuse(DomainValue diffused_sum, DomainValue seed_sum) { return diffused_sum - seed_sum; }

/// MAC input for a diffused pair: two big-endian words, K-chain first.
inline std::array<std::uint8_t, 16> mac_payload(DomainValue dsum, DomainValue dsum_prime) {
  std::array<std::uint8_t, 16> out{};
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(dsum.residue >> (56 - 8 * i));
    out[8 + i] = static_cast<std::uint8_t>(dsum_prime.residue >> (56 - 8 * i));
  }
  return out;
}

inline MacTag mac(const Key& key, ByteView payload) {
  std::array<unsigned char, 16> out{};
  detail::keyed_blake2b(out, payload, key.bytes, detail::kPersonalMac);
  MacTag tag;
  std::copy_n(out.begin(), tag.bytes.size(), tag.bytes.begin());
  return tag;
}

inline MacTag mac_pair(const Key& key, DomainValue dsum, DomainValue dsum_prime) {
  auto payload = mac_payload(dsum, dsum_prime);
  return mac(key, payload);
}

inline MacTag combine_macs(MacTag own, std::span<const MacTag> children) {
  for (const auto& c : children) own ^= c;
  return own;
}

/// Independent subkey for a labelled purpose (e.g. the BS-direct channel).
inline Key derive_key(const Key& key, std::string_view label) {
  std::array<unsigned char, 16> out{};
  ByteView in(reinterpret_cast<const std::uint8_t*>(label.data()), label.size());
  detail::keyed_blake2b(out, in, key.bytes, detail::kPersonalDerive);
  Key k;
  std::copy(out.begin(), out.end(), k.bytes.begin());
  return k;
}

inline constexpr std::size_t kSealOverhead = crypto_aead_chacha20poly1305_ietf_ABYTES;

namespace detail {

inline std::array<unsigned char, crypto_aead_chacha20poly1305_ietf_KEYBYTES> aead_key(const Key& key) {
  std::array<unsigned char, crypto_aead_chacha20poly1305_ietf_KEYBYTES> out{};
  detail::keyed_blake2b(out, {}, key.bytes, kPersonalSeal);
  return out;
}

inline std::array<unsigned char, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> aead_nonce(std::uint64_t counter) {
  std::array<unsigned char, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> nonce{};
  for (int i = 0; i < 8; ++i) nonce[4 + i] = static_cast<unsigned char>(counter >> (56 - 8 * i));
  return nonce;
}

}  // namespace detail

/// Stateless AEAD under a channel key; the counter is both nonce and
/// associated data.
inline Bytes seal(const Key& channel_key, std::uint64_t counter, ByteView plaintext) {
  detail::ensure_sodium();
  auto k = detail::aead_key(channel_key);
  auto nonce = detail::aead_nonce(counter);
  auto ad = ByteWriter{}.u64(counter).take();
  Bytes out(plaintext.size() + kSealOverhead);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(), plaintext.size(), ad.data(),
                                            ad.size(), nullptr, nonce.data(), k.data());
  out.resize(out_len);
  return out;
}

inline Bytes open_sealed(const Key& channel_key, std::uint64_t counter, ByteView ciphertext) {
  detail::ensure_sodium();
  if (ciphertext.size() < kSealOverhead) throw Error(Errc::auth_failure, "ciphertext shorter than tag");
  auto k = detail::aead_key(channel_key);
  auto nonce = detail::aead_nonce(counter);
  auto ad = ByteWriter{}.u64(counter).take();
  Bytes out(ciphertext.size() - kSealOverhead);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
                                                ad.data(), ad.size(), nonce.data(), k.data()) != 0) {
    throw Error(Errc::auth_failure, "sealed payload failed authentication");
  }
  out.resize(out_len);
  return out;
}

/// Receiving half of a pairwise channel: rejects counters that do not
/// strictly exceed the last accepted one.
class ChannelReceiver {
 public:
  ChannelReceiver() = default;
  explicit ChannelReceiver(Key key) : key_(key) {}

  Bytes open(std::uint64_t counter, ByteView ciphertext) {
    if (counter <= last_accepted_) {
      throw Error(Errc::replay_detected, "counter " + std::to_string(counter) + " <= last accepted " +
                                             std::to_string(last_accepted_));
    }
    auto plain = open_sealed(key_, counter, ciphertext);
    last_accepted_ = counter;
    return plain;
  }

  std::uint64_t last_accepted() const { return last_accepted_; }

 private:
  Key key_{};
  std::uint64_t last_accepted_ = 0;
};

/// Sending half of a pairwise channel. Counters start at 1.
class ChannelSender {
 public:
  ChannelSender() = default;
  explicit ChannelSender(Key key) : key_(key) {}

  struct Sealed {
    std::uint64_t counter;
    Bytes ciphertext;
  };

  Sealed seal(ByteView plaintext) {
    ++counter_;
    return {counter_, cagg::seal(key_, counter_, plaintext)};
  }

  /// Reserves the next counter; the caller seals under it.
  std::uint64_t next() { return ++counter_; }

  /// Seals under an explicit counter without advancing state (adversarial replays).
  Bytes seal_at(std::uint64_t counter, ByteView plaintext) const { return cagg::seal(key_, counter, plaintext); }

  std::uint64_t counter() const { return counter_; }
  const Key& key() const { return key_; }

 private:
  Key key_{};
  std::uint64_t counter_ = 0;
};

/// Position of one node's seed chain (K or K').
struct SeedState {
  DomainValue origin{};
  DomainValue seed{};
  std::uint64_t round = 0;

  static SeedState start(DomainValue origin) { return {origin, origin, 0}; }

  /// Advances to `target` and returns the number of generator steps taken.
  std::uint64_t advance_to(const Key& key, std::uint64_t target) {
    std::uint64_t steps = 0;
    while (round < target) {
      ++round;
      seed = next_seed(key, seed, round);
      ++steps;
    }
    return steps;
  }
};

/// Seed D_round regenerated from the origin, independent of any cached state.
inline DomainValue seed_at(const Key& key, DomainValue origin, std::uint64_t round) {
  auto s = SeedState::start(origin);
  s.advance_to(key, round);
  return s.seed;
}

}  // namespace cagg
