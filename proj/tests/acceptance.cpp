// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/cagg.hpp"
#include "support.hpp"

using namespace cagg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::uint64_t oracle_sum(const Scenario& sc, std::uint64_t round, const std::vector<NodeId>& ids) {
  std::vector<std::uint64_t> v;
  for (auto id : ids) v.push_back(sensor_reading(sc.seed, id, round, sc.domain).residue);
  return oracle::plaintext_sum(v);
}

std::vector<NodeId> all_ids(std::size_t n) {
  std::vector<NodeId> v;
  for (NodeId id = 1; id <= n; ++id) v.push_back(id);
  return v;
}

std::string render(const SimulationResult& r) {
  std::ostringstream out;
  write_report(out, r.results);
  write_metrics_csv(out, r.metrics, false);
  return out.str();
}

// 1. Decoded SUM equals the plaintext sum on random trees and readings.
Verdict homomorphic_correctness() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::size_t failures = 0;
  const std::size_t instances = 10000;
  for (std::size_t i = 0; i < instances; ++i) {
    Scenario sc;
    sc.generator_nodes = 2 + rng() % 199;
    sc.family = (i % 4 == 3) ? GraphFamily::random_geometric : GraphFamily::random_recursive;
    sc.seed = rng();
    auto lo = static_cast<double>(static_cast<int>(rng() % 200) - 100);
    sc.domain = DomainParams{lo, lo + 1.0 + static_cast<double>(rng() % 500), static_cast<double>(1 + rng() % 1000)};
    Simulator sim(sc);
    auto res = sim.run_round(1);
    auto ids = all_ids(sc.generator_nodes);
    auto expect = oracle_sum(sc, 1, ids);
    bool ok = res.integrity == Integrity::passed && res.participants == ids && res.raw_sum.residue == expect &&
              res.value && *res.value == sc.domain.decode_sum(DomainValue(expect), ids.size());
    failures += !ok;
  }
  double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu instances, %zu failures, %.1f s (limit 60 s)", instances, failures, secs);
  return {failures == 0 && secs < 60.0, buf};
}

// 2. Honest rounds always pass; single-component forgeries never do.
Verdict ipet_soundness() {
  std::mt19937_64 rng(202);
  Scenario honest;
  honest.generator_nodes = 60;
  honest.seed = 7;
  honest.rounds = 500;
  auto out = run(honest);
  std::size_t equal = 0;
  for (const auto& r : out.results) {
    equal += r.integrity == Integrity::passed && !r.report &&
             r.raw_sum.residue == oracle_sum(honest, r.round, all_ids(60));
  }

  std::size_t undetected = 0;
  const std::size_t forgeries = 10000;
  for (std::size_t i = 0; i < forgeries; ++i) {
    Scenario sc;
    sc.generator_nodes = 2 + rng() % 60;
    sc.seed = rng();
    Simulator sim(sc);
    DomainValue delta(rng());
    while (delta.residue == 0) delta = DomainValue(rng());
    if (i % 2 == 0) {
      // In-network: a random node adds delta to its K-chain sum.
      auto victim = static_cast<NodeId>(1 + rng() % sc.generator_nodes);
      forge_children(sim.nodes()[victim], delta);
      auto res = sim.run_round(1);
      undetected += !res.report.has_value();
    } else {
      // On the wire: delta lands on the K'-chain of the final pair.
      sim.run_round(1);
      auto& bs = sim.base_station();
      auto fp = finalize(bs.children_packets());
      undetected += bs.ipet_check(fp.dsum, fp.dsum_prime + delta, fp.participants, 1).equal;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu/500 honest equal, %zu/%zu forgeries undetected", equal, undetected, forgeries);
  return {equal == 500 && undetected == 0, buf};
}

// 3. ComAtt isolates exactly the compromised set.
Verdict attestation_correctness() {
  std::mt19937_64 rng(303);
  std::size_t mismatches = 0, honest_left = 0;
  const std::size_t scenarios = 200;
  for (std::size_t i = 0; i < scenarios; ++i) {
    Scenario sc;
    sc.generator_nodes = 5 + rng() % 96;
    sc.seed = rng();
    sc.force_attest = true;
    auto tree = build_tree(sc.build_graph());
    const auto n = sc.generator_nodes;

    std::set<NodeId> forgers, noncommitters;
    auto nf = rng() % 4;
    while (forgers.size() < nf) forgers.insert(static_cast<NodeId>(1 + rng() % n));
    // Nodes whose IPET fails: forgers and their ancestors.
    std::set<NodeId> failing;
    for (auto f : forgers) {
      for (NodeId a = f; a != kBaseStation; a = tree.parent(a)) failing.insert(a);
    }
    // A non-committer is probed only when its parent is the BS or already listed.
    auto nn = (nf == 0 ? 1 : 0) + rng() % 3;
    for (std::size_t tries = 0; noncommitters.size() < nn && tries < 200; ++tries) {
      auto id = static_cast<NodeId>(1 + rng() % n);
      auto p = tree.parent(id);
      if (p == kBaseStation || failing.contains(p) || noncommitters.contains(p)) noncommitters.insert(id);
    }
    for (auto f : forgers) {
      sc.plan.add(f, Behavior{BehaviorKind::forge_children, static_cast<double>(1 + rng() % 10000) / sc.domain.scale});
    }
    for (auto c : noncommitters) {
      sc.plan.add(c, Behavior{BehaviorKind::noncommit});
      if (rng() % 2) sc.plan.add(c, Behavior{BehaviorKind::forge_children, 0.5});
    }
    std::set<NodeId> truth = forgers;
    truth.insert(noncommitters.begin(), noncommitters.end());

    Simulator sim(sc);
    auto res = sim.run_round(1);
    if (!res.report || res.report->outliers != truth) {
      ++mismatches;
      continue;
    }
    for (auto id : res.report->outliers) {
      honest_left += !truth.contains(id) && !res.report->non_committed.contains(id);
    }
    if (res.integrity != Integrity::attested && !(truth.empty() && res.integrity == Integrity::passed)) {
      ++mismatches;
      continue;
    }
    if (res.raw_sum.residue != oracle_sum(sc, 1, res.participants)) ++mismatches;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu scenarios, %zu mismatches, %zu honest committed nodes left in list_L", scenarios,
                mismatches, honest_left);
  return {mismatches == 0 && honest_left == 0, buf};
}

// 4. Probes grow with ln n on random recursive trees; path worst case stays within n.
Verdict probe_scaling() {
  auto t0 = Clock::now();
  const std::vector<std::size_t> sizes{64, 256, 1024, 4096};
  auto rows = measure_scaling(sizes, 100, 404);
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(r.mean_probes);
  }
  auto fit = fit_line(x, y);
  const double at4096 = rows.back().mean_probes;
  bool path_ok = true;
  std::uint64_t path_max = 0;
  for (std::size_t n : {64u, 256u, 1024u}) {
    auto p = measure_scaling({n}, 20, 405, GraphFamily::path);
    path_ok = path_ok && p[0].max_probes <= n;
    path_max = std::max(path_max, p[0].max_probes);
  }
  double secs = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "mean probes %.2f/%.2f/%.2f/%.2f, R^2=%.4f (>= 0.9), at 4096 %.2f (< 409.6), path max %llu <= n, "
                "%.1f s (limit 300 s)",
                rows[0].mean_probes, rows[1].mean_probes, rows[2].mean_probes, rows[3].mean_probes, fit.r_squared,
                at4096, static_cast<unsigned long long>(path_max), secs);
  return {fit.r_squared >= 0.9 && at4096 < 0.1 * 4096 && path_ok && secs < 300.0, buf};
}

// 5. Final-pair verification work does not depend on n.
Verdict verification_cost() {
  std::vector<double> ops;
  std::string per;
  for (std::size_t n : {64u, 256u, 1024u, 4096u}) {
    Scenario sc;
    sc.generator_nodes = n;
    sc.seed = 505 + n;
    sc.rounds = 5;
    auto out = run(sc);
    double mean = 0;
    for (const auto& m : out.metrics.rounds) mean += static_cast<double>(m.verify_ops);
    mean /= static_cast<double>(out.metrics.rounds.size());
    ops.push_back(mean);
    per += (per.empty() ? "" : "/") + std::to_string(static_cast<long long>(mean));
  }
  auto [lo, hi] = std::minmax_element(ops.begin(), ops.end());
  double spread = *hi / *lo;
  char buf[160];
  std::snprintf(buf, sizeof buf, "ops per round %s for n=64..4096, spread %.2fx (<= 2x)", per.c_str(), spread);
  return {spread <= 2.0, buf};
}

// 6. An in-range forged reading passes and shifts the sum by exactly delta.
Verdict forge_own_blind_spot() {
  std::mt19937_64 rng(606);
  std::size_t bad = 0;
  const std::size_t scenarios = 100;
  for (std::size_t i = 0; i < scenarios; ++i) {
    Scenario sc;
    sc.generator_nodes = 3 + rng() % 80;
    sc.seed = rng();
    sc.force_attest = (i % 2) == 0;
    auto victim = static_cast<NodeId>(1 + rng() % sc.generator_nodes);
    auto m = static_cast<std::int64_t>(sensor_reading(sc.seed, victim, 1, sc.domain).residue);
    auto max_raw = static_cast<std::int64_t>(sc.domain.max_raw());
    // Uniform raw delta keeping m + delta in range, excluding 0.
    std::int64_t delta = 0;
    while (delta == 0) delta = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(max_raw + 1)) - m;
    sc.plan.add(victim, Behavior{BehaviorKind::forge_own, static_cast<double>(delta) / sc.domain.scale});

    auto out = run(sc);
    const auto& res = out.results[0];
    auto honest = oracle_sum(sc, 1, all_ids(sc.generator_nodes));
    bool ok = res.integrity == Integrity::passed && (!res.report || res.report->outliers.empty()) &&
              static_cast<std::int64_t>(res.raw_sum.residue - honest) == delta;
    bad += !ok;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu scenarios, %zu with list_L != {} or deviation != delta", scenarios, bad);
  return {bad == 0, buf};
}

// 7. Same seed, same bytes.
Verdict determinism() {
  std::mt19937_64 rng(707);
  std::size_t differing = 0;
  const GraphFamily families[] = {GraphFamily::random_recursive, GraphFamily::random_geometric, GraphFamily::path,
                                  GraphFamily::star};
  for (std::size_t i = 0; i < 20; ++i) {
    Scenario sc;
    sc.family = families[i % 4];
    sc.generator_nodes = 10 + rng() % 60;
    sc.seed = rng();
    sc.rounds = 1 + rng() % 4;
    sc.function = i % 3 == 0 ? AggFunction::mean : AggFunction::sum;
    sc.audit_probability = i % 5 == 0 ? 0.5 : 0.0;
    auto a = static_cast<NodeId>(1 + rng() % sc.generator_nodes);
    auto b = static_cast<NodeId>(1 + rng() % sc.generator_nodes);
    sc.plan.add(a, Behavior{BehaviorKind::forge_children, 1.25});
    if (b != a) sc.plan.add(b, Behavior{BehaviorKind::noncommit});
    if (i % 4 == 1) sc.offline[b] = 2;
    differing += render(run(sc)) != render(run(sc));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "20 scenarios replayed, %zu differ", differing);
  return {differing == 0, buf};
}

// 8. A passive adversary without node keys guesses readings at chance.
Verdict secrecy() {
  auto r = secrecy_experiment(10000, 808);
  char buf[160];
  std::snprintf(buf, sizeof buf, "best distinguisher %.4f over 10000 trials (<= 0.51; %s %.4f, %s %.4f, %s %.4f)",
                r.best(), SecrecyResult::strategy_names[0], r.success[0], SecrecyResult::strategy_names[1],
                r.success[1], SecrecyResult::strategy_names[2], r.success[2]);
  return {r.best() <= 0.51, buf};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
  };
  const Criterion criteria[] = {
      {"AC1 homomorphic-correctness", homomorphic_correctness},
      {"AC2 ipet-soundness", ipet_soundness},
      {"AC3 attestation-correctness", attestation_correctness},
      {"AC4 probe-scaling", probe_scaling},
      {"AC5 verification-cost", verification_cost},
      {"AC6 forge-own-blind-spot", forge_own_blind_spot},
      {"AC7 determinism", determinism},
      {"AC8 secrecy", secrecy},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
