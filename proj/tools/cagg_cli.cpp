// cagg: run aggregation scenarios, scaling experiments and the self-test.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/cagg.hpp"

namespace {

constexpr int kExitInvalid = 2;

struct RunOptions {
  std::string scenario_path;
  std::string topology_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> rounds;
  std::string function;
  bool force_attest = false;
  std::optional<double> audit_prob;
  std::string out_dir = ".";
  bool no_timestamp = false;
};

std::optional<std::uint64_t> env_seed() {
  const char* env = std::getenv("CONCEALED_AGG_SEED");
  if (!env || !*env) return std::nullopt;
  std::istringstream in(env);
  std::uint64_t v = 0;
  if (!(in >> v)) throw cagg::Error(cagg::Errc::scenario_invalid, "CONCEALED_AGG_SEED is not an unsigned integer");
  return v;
}

int cmd_run(const RunOptions& opt) {
  cagg::Scenario sc;
  try {
    if (!opt.scenario_path.empty()) sc = cagg::load_scenario(opt.scenario_path);
    if (!opt.topology_path.empty()) {
      sc.graph = cagg::load_topology(opt.topology_path);
      sc.family = cagg::GraphFamily::explicit_edges;
    }
    if (opt.seed) sc.seed = *opt.seed;
    if (auto s = env_seed()) sc.seed = *s;
    if (opt.rounds) sc.rounds = *opt.rounds;
    if (opt.function == "sum") sc.function = cagg::AggFunction::sum;
    if (opt.function == "mean") sc.function = cagg::AggFunction::mean;
    if (opt.force_attest) sc.force_attest = true;
    if (opt.audit_prob) sc.audit_probability = *opt.audit_prob;
    sc.validate();

    cagg::Simulator sim(sc);
    auto result = sim.run();

    std::filesystem::create_directories(opt.out_dir);
    std::ofstream report(std::filesystem::path(opt.out_dir) / "report.txt");
    std::ofstream metrics(std::filesystem::path(opt.out_dir) / "metrics.csv");
    if (!report || !metrics) {
      std::cerr << "error: cannot write to '" << opt.out_dir << "'\n";
      return 1;
    }
    cagg::write_report(report, result.results);
    cagg::write_metrics_csv(metrics, result.metrics, !opt.no_timestamp);
    cagg::write_report(std::cout, result.results);
    return 0;
  } catch (const cagg::Error& e) {
    if (e.code() == cagg::Errc::scenario_invalid || e.code() == cagg::Errc::disconnected_graph) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInvalid;
    }
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_scaling(const std::vector<std::size_t>& sizes, std::size_t trials, std::uint64_t seed,
                const std::string& family, const std::string& out_path) {
  if (sizes.empty() || trials == 0) {
    std::cerr << "usage error: --sizes and --trials must be positive\n";
    return kExitInvalid;
  }
  for (auto n : sizes) {
    if (n == 0) {
      std::cerr << "usage error: network sizes must be positive\n";
      return kExitInvalid;
    }
  }
  cagg::GraphFamily fam = cagg::GraphFamily::random_recursive;
  if (family == "path") fam = cagg::GraphFamily::path;
  else if (family == "star") fam = cagg::GraphFamily::star;
  else if (family == "rgg") fam = cagg::GraphFamily::random_geometric;
  auto rows = cagg::measure_scaling(sizes, trials, seed, fam);
  if (out_path.empty()) {
    cagg::write_scaling_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    cagg::write_scaling_csv(out, rows);
  }
  return 0;
}

int cmd_selftest(std::uint64_t trials, bool corrupt) {
  cagg::SelftestOptions opt;
  opt.trials = trials;
  opt.corrupt_seed_arithmetic = corrupt;
  auto res = cagg::run_selftest(opt);
  for (const auto& p : res.passed) std::cout << "ok   " << p << '\n';
  if (!res.ok) {
    std::cout << "FAIL " << res.failed_property << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concealed hop-by-hop aggregation simulator"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write report.txt and metrics.csv");
  run_cmd->add_option("scenario", run.scenario_path, "Scenario file");
  run_cmd->add_option("--topology", run.topology_path, "Topology file (nodes/edge lines)");
  run_cmd->add_option("--seed", run.seed, "RNG seed (CONCEALED_AGG_SEED overrides)");
  run_cmd->add_option("--rounds", run.rounds, "Number of query rounds")->check(CLI::PositiveNumber);
  run_cmd->add_option("--function", run.function, "Aggregation function")->check(CLI::IsMember({"sum", "mean"}));
  run_cmd->add_flag("--force-attest", run.force_attest, "Run attestation even when IPET passes");
  run_cmd->add_option("--audit-prob", run.audit_prob, "Per-round random audit probability")
      ->check(CLI::Range(0.0, 1.0));
  run_cmd->add_option("--out", run.out_dir, "Output directory");
  run_cmd->add_flag("--no-timestamp", run.no_timestamp, "Omit wall-clock fields from metrics.csv");

  std::vector<std::size_t> sizes;
  std::size_t trials = 1;
  std::uint64_t scaling_seed = 1;
  std::string family = "rrt";
  std::string scaling_out;
  auto* scaling_cmd = app.add_subcommand("scaling", "Attestation probe counts across network sizes (CSV)");
  scaling_cmd->add_option("--sizes", sizes, "Comma-separated network sizes")->delimiter(',')->required();
  scaling_cmd->add_option("--trials", trials, "Trials per size");
  scaling_cmd->add_option("--seed", scaling_seed, "RNG seed");
  scaling_cmd->add_option("--family", family, "Topology family")->check(CLI::IsMember({"rrt", "rgg", "path", "star"}));
  scaling_cmd->add_option("--out", scaling_out, "Write CSV here instead of stdout");

  std::uint64_t selftest_trials = 500;
  bool corrupt = false;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the property self-test");
  selftest_cmd->add_option("--trials", selftest_trials, "Trials per property");
  selftest_cmd->add_flag("--inject-fault", corrupt, "Corrupt the seed arithmetic (mutation check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  if (*run_cmd) {
    if (run.scenario_path.empty() && run.topology_path.empty()) {
      std::cerr << "usage error: give a scenario file or --topology\n";
      return kExitInvalid;
    }
    return cmd_run(run);
  }
  if (*scaling_cmd) {
    if (auto s = env_seed()) scaling_seed = *s;
    return cmd_scaling(sizes, trials, scaling_seed, family, scaling_out);
  }
  return cmd_selftest(selftest_trials, corrupt);
}
