#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cagg/error.hpp"

namespace cagg {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Big-endian writer used by every wire format in the library.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  ByteWriter& u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
  }
  ByteWriter& u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
  }
  ByteWriter& raw(ByteView bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    return *this;
  }

  const Bytes& bytes() const& { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    auto b = need(4);
    std::uint32_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }
  std::uint64_t u64() {
    auto b = need(8);
    std::uint64_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }
  ByteView raw(std::size_t n) { return need(n); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  ByteView need(std::size_t n) {
    if (remaining() < n) throw Error(Errc::malformed_message, "truncated message");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

}  // namespace cagg
