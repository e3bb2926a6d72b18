#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cagg/cagg.hpp"
#include "support.hpp"

using namespace cagg;

namespace {

Scenario path_scenario(std::size_t n, std::uint64_t seed = 5) {
  Scenario sc;
  sc.family = GraphFamily::path;
  sc.generator_nodes = n;
  sc.seed = seed;
  return sc;
}

std::uint64_t plaintext(const SimulationResult& r, std::size_t round_index, const std::vector<NodeId>& ids) {
  std::vector<std::uint64_t> v;
  for (auto id : ids) v.push_back(r.readings[round_index][id].residue);
  return oracle::plaintext_sum(v);
}

std::string report_text(const SimulationResult& r) {
  std::ostringstream out;
  write_report(out, r.results);
  write_metrics_csv(out, r.metrics, false);
  return out.str();
}

}  // namespace

TEST(Simulator, ThreeNodePathHonest) {
  auto sc = path_scenario(3);
  auto out = run(sc);
  ASSERT_EQ(out.results.size(), 1u);
  const auto& res = out.results[0];
  EXPECT_EQ(res.integrity, Integrity::passed);
  EXPECT_EQ(res.participants, (std::vector<NodeId>{1, 2, 3}));
  auto sum = plaintext(out, 0, {1, 2, 3});
  EXPECT_EQ(res.raw_sum.residue, sum);
  ASSERT_TRUE(res.value);
  EXPECT_DOUBLE_EQ(*res.value, sc.domain.decode_sum(DomainValue(sum), 3));
}

TEST(Simulator, OneQueryAndOnePacketPerNode) {
  Scenario sc;
  sc.generator_nodes = 57;
  sc.seed = 3;
  sc.rounds = 3;
  auto out = run(sc);
  for (const auto& m : out.metrics.rounds) {
    EXPECT_EQ(m.messages, 2u * 57u);
    EXPECT_EQ(m.probes, 0u);
    EXPECT_EQ(m.verify_ops, 3u);
  }
}

TEST(Simulator, ReplayedRoundIsStale) {
  Simulator sim(path_scenario(4));
  sim.run_round(1);
  EXPECT_THROW(sim.run_round(1), Error);
  for (NodeId id = 1; id <= 4; ++id) {
    try {
      sim.nodes()[id].handle_query({1, AggFunction::sum});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::stale_round);
    }
  }
}

TEST(Simulator, FunctionTagPreserved) {
  auto sc = path_scenario(5);
  sc.function = AggFunction::mean;
  Simulator sim(sc);
  auto res = sim.run_round(1);
  EXPECT_EQ(res.function, AggFunction::mean);
  for (NodeId id = 1; id <= 5; ++id) EXPECT_EQ(sim.nodes()[id].round_state()->function, AggFunction::mean);
}

TEST(Simulator, SameSeedSameBytes) {
  Scenario sc;
  sc.generator_nodes = 40;
  sc.seed = 17;
  sc.rounds = 4;
  sc.plan.add(9, Behavior{BehaviorKind::forge_children, 2.5});
  EXPECT_EQ(report_text(run(sc)), report_text(run(sc)));
  auto other = sc;
  other.seed = 18;
  EXPECT_NE(report_text(run(sc)), report_text(run(other)));
}

TEST(Simulator, ForgeryIsAttested) {
  Scenario sc;
  sc.generator_nodes = 30;
  sc.seed = 8;
  sc.plan.add(12, Behavior{BehaviorKind::forge_children, 4.0});
  auto out = run(sc);
  const auto& res = out.results[0];
  EXPECT_EQ(res.integrity, Integrity::attested);
  ASSERT_TRUE(res.report);
  EXPECT_EQ(res.report->outliers, std::set<NodeId>{12});
  EXPECT_EQ(res.raw_sum.residue, plaintext(out, 0, res.participants));
}

TEST(Simulator, TriggerRoundDelaysAttack) {
  Scenario sc;
  sc.generator_nodes = 20;
  sc.seed = 9;
  sc.rounds = 3;
  sc.plan.trigger_round = 3;
  sc.plan.add(4, Behavior{BehaviorKind::forge_children, 1.0});
  auto out = run(sc);
  EXPECT_EQ(out.results[0].integrity, Integrity::passed);
  EXPECT_EQ(out.results[1].integrity, Integrity::passed);
  EXPECT_EQ(out.results[2].integrity, Integrity::attested);
}

TEST(Simulator, OfflineNodeBecomesUnreachable) {
  auto sc = path_scenario(5);
  sc.rounds = 3;
  sc.offline[4] = 1;
  Simulator sim(sc);
  auto out = sim.run();
  for (const auto& res : out.results) {
    EXPECT_EQ(res.integrity, Integrity::passed);
    EXPECT_EQ(res.participants, (std::vector<NodeId>{1, 2, 3}));
  }
  EXPECT_EQ(sim.base_station().record(4).status, NodeStatus::unreachable);
  EXPECT_EQ(sim.base_station().record(5).status, NodeStatus::unreachable);
  EXPECT_EQ(sim.base_station().record(3).status, NodeStatus::alive);
}

TEST(Simulator, DropChildLeavesSubtreeOut) {
  auto sc = path_scenario(4);
  Behavior b{BehaviorKind::drop_child};
  b.target = 3;
  sc.plan.add(2, b);
  auto out = run(sc);
  EXPECT_EQ(out.results[0].integrity, Integrity::passed);
  EXPECT_EQ(out.results[0].participants, (std::vector<NodeId>{1, 2}));
}

TEST(Simulator, RejectsBadPlans) {
  auto sc = path_scenario(3);
  sc.plan.add(9, Behavior{BehaviorKind::noncommit});
  EXPECT_THROW(Simulator{sc}, Error);
  auto sc2 = path_scenario(3);
  sc2.offline[7] = 1;
  EXPECT_THROW(Simulator{sc2}, Error);
}

TEST(Scaling, SingleNodeNeedsOneProbe) {
  auto rows = measure_scaling({1}, 5, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].mean_probes, 1.0);
  EXPECT_EQ(rows[0].max_probes, 1u);
}

TEST(Scaling, StarProbesEveryChild) {
  auto rows = measure_scaling({12}, 6, 4, GraphFamily::star);
  EXPECT_DOUBLE_EQ(rows[0].mean_probes, 12.0);
  EXPECT_DOUBLE_EQ(rows[0].mean_depth, 1.0);
}

TEST(Scaling, PathNeverExceedsN) {
  auto rows = measure_scaling({10, 50}, 20, 5, GraphFamily::path);
  for (const auto& r : rows) EXPECT_LE(r.max_probes, r.n);
}

TEST(Scaling, GrowthIsSublinear) {
  auto rows = measure_scaling({64, 256, 1024}, 40, 6);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_LT(rows[2].mean_probes, 3.0 * rows[0].mean_probes);
  EXPECT_LT(rows[2].mean_probes, 0.1 * 1024);
}

TEST(Scaling, Deterministic) {
  auto a = measure_scaling({100}, 16, 7);
  auto b = measure_scaling({100}, 16, 7);
  EXPECT_EQ(a[0].mean_probes, b[0].mean_probes);
  EXPECT_EQ(a[0].mean_messages, b[0].mean_messages);
}

TEST(FitLine, ExactLine) {
  auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Report, Format) {
  QueryResult r;
  r.round = 2;
  r.function = AggFunction::sum;
  r.value = 12.5;
  r.participants = {1, 2, 3};
  r.integrity = Integrity::attested;
  AttestationReport rep;
  rep.outliers = {4, 7};
  rep.probes = 6;
  r.report = rep;
  EXPECT_EQ(format_result(r),
            "round=2 function=sum value=12.500000 n_participants=3 integrity=attested probes=6 outliers=4,7");
  QueryResult none;
  none.round = 1;
  EXPECT_EQ(format_result(none),
            "round=1 function=sum value=NA n_participants=0 integrity=rejected probes=0 outliers=-");
}

TEST(Report, MetricsCsv) {
  Metrics m;
  m.rounds.push_back({1, 10, 300, 4, 0, 0, 3, 5, 99});
  m.rounds.push_back({2, 12, 320, 4, 2, 1, 3, 6, 88});
  std::ostringstream with, without;
  write_metrics_csv(with, m, true);
  write_metrics_csv(without, m, false);
  EXPECT_EQ(without.str(),
            "round,messages,bytes,seed_regens,probes\n1,10,300,4,0\n2,12,320,4,2\n# total,22,620,8,2\n"
            "# reaggregations=1 verify_ops=6 path_cost=11\n");
  EXPECT_EQ(with.str(), without.str() + "# wall_us=187\n");
}

TEST(Selftest, PassesAndCatchesMutation) {
  SelftestOptions opt;
  opt.trials = 200;
  auto ok = run_selftest(opt);
  EXPECT_TRUE(ok.ok);
  opt.corrupt_seed_arithmetic = true;
  auto bad = run_selftest(opt);
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.failed_property.empty());
}
