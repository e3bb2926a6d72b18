#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "cagg/error.hpp"

namespace cagg {

/// Residue in Z/2^64. Readings, seeds, diffused values and their sums all
/// live here; unsigned wraparound is the ring arithmetic.
struct DomainValue {
  std::uint64_t residue = 0;

  constexpr DomainValue() = default;
  constexpr explicit DomainValue(std::uint64_t r) : residue(r) {}

  friend constexpr DomainValue operator+(DomainValue a, DomainValue b) { return DomainValue(a.residue + b.residue); }
  friend constexpr DomainValue operator-(DomainValue a, DomainValue b) { return DomainValue(a.residue - b.residue); }
  constexpr DomainValue& operator+=(DomainValue o) {
    residue += o.residue;
    return *this;
  }
  constexpr DomainValue& operator-=(DomainValue o) {
    residue -= o.residue;
    return *this;
  }
  friend constexpr bool operator==(DomainValue, DomainValue) = default;
  friend constexpr auto operator<=>(DomainValue, DomainValue) = default;
};

/// Fixed-point mapping of the sensing range [lower, upper] onto raw residues
/// 0..(upper - lower) * scale.
struct DomainParams {
  double lower = 0.0;
  double upper = 1000.0;
  double scale = 100.0;

  std::uint64_t max_raw() const { return static_cast<std::uint64_t>(std::llround((upper - lower) * scale)); }

  bool valid() const { return lower < upper && scale > 0.0 && std::isfinite(lower) && std::isfinite(upper); }

  DomainValue encode(double reading) const {
    if (!(reading >= lower && reading <= upper)) {
      throw Error(Errc::out_of_range, "reading " + std::to_string(reading) + " outside [" +
                                          std::to_string(lower) + ", " + std::to_string(upper) + "]");
    }
    auto raw = static_cast<std::uint64_t>(std::llround((reading - lower) * scale));
    return DomainValue(raw > max_raw() ? max_raw() : raw);
  }

  double decode(DomainValue v) const { return lower + static_cast<double>(v.residue) / scale; }

  /// Decodes a sum of `count` encoded readings (each carries one `lower` offset).
  double decode_sum(DomainValue sum, std::size_t count) const {
    return static_cast<double>(count) * lower + static_cast<double>(sum.residue) / scale;
  }

  /// Reading-unit difference to raw ring offset (two's complement for negatives).
  DomainValue delta(double units) const {
    return DomainValue(static_cast<std::uint64_t>(std::llround(units * scale)));
  }
};

}  // namespace cagg
