#pragma once

// Reduced-size property checks shipped with the CLI (`cagg selftest`).

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cagg/crypto.hpp"

namespace cagg {

struct SelftestOptions {
  std::uint64_t trials = 1000;
  std::uint64_t seed = 7;
  // Mutation hook: replaces the diffusion inverse with an off-by-one version.
  bool corrupt_seed_arithmetic = false;
};

struct SelftestResult {
  bool ok = true;
  std::string failed_property;  // first failing property
  std::vector<std::string> passed;
};

inline SelftestResult run_selftest(const SelftestOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  auto key = [&rng] {
    Key k;
    for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
    return k;
  };
  std::function<DomainValue(DomainValue, DomainValue)> revert = undiffuse;
  if (opt.corrupt_seed_arithmetic) {
    revert = [](DomainValue d, DomainValue s) { return d - s + DomainValue(1); };
  }

  SelftestResult res;
  auto check = [&res](const char* name, bool ok) {
    if (!res.ok) return;
    if (ok) {
      res.passed.emplace_back(name);
    } else {
      res.ok = false;
      res.failed_property = name;
    }
  };

  bool homomorphic = true;
  for (std::uint64_t t = 0; t < opt.trials && homomorphic; ++t) {
    DomainValue dsum, seeds, plain;
    const auto count = 1 + rng() % 50;
    for (std::uint64_t i = 0; i < count; ++i) {
      DomainValue s(rng()), m(rng() % 100001);
      dsum += diffuse(s, m);
      seeds += s;
      plain += m;
    }
    homomorphic = revert(dsum, seeds) == plain;
  }
  check("homomorphism", homomorphic);

  bool ipet = true;
  for (std::uint64_t t = 0; t < opt.trials && ipet; ++t) {
    auto k = key(), kp = key();
    DomainValue origin(rng() % 100001), m(rng() % 100001);
    const auto round = 1 + rng() % 8;
    auto d = seed_at(k, origin, round), dp = seed_at(kp, origin, round);
    auto a = diffuse(d, m), b = diffuse(dp, m);
    bool honest = revert(a, d) == revert(b, dp);
    DomainValue delta(rng() | 1);
    bool forged_caught = revert(a + delta, d) != revert(b, dp);
    ipet = honest && forged_caught;
  }
  check("ipet", ipet);

  bool group = true;
  for (std::uint64_t t = 0; t < opt.trials && group; ++t) {
    auto k = key();
    auto a = mac(k, mac_payload(DomainValue(rng()), DomainValue(rng())));
    auto b = mac(k, mac_payload(DomainValue(rng()), DomainValue(rng())));
    auto c = mac(k, mac_payload(DomainValue(rng()), DomainValue(rng())));
    group = ((a ^ b) ^ c) == (a ^ (b ^ c)) && (a ^ b) == (b ^ a) && (a ^ MacTag::zero()) == a &&
            (a ^ a).is_zero();
  }
  check("mac-group", group);
  return res;
}

}  // namespace cagg
