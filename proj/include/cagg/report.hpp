#pragma once

// Text outputs: one `key=value` record per round, and per-round metrics CSV
// with a `#` summary footer.

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/basestation.hpp"
#include "cagg/simulator.hpp"

namespace cagg {

inline std::string format_value(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

template <typename Range>
std::string join_ids(const Range& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ',';
    out += std::to_string(id);
  }
  return out.empty() ? "-" : out;
}

inline std::string format_result(const QueryResult& r) {
  std::ostringstream out;
  out << "round=" << r.round << " function=" << function_name(r.function) << " value=" << format_value(r.value)
      << " n_participants=" << r.participants.size() << " integrity=" << integrity_name(r.integrity)
      << " probes=" << (r.report ? r.report->probes : 0)
      << " outliers=" << (r.report ? join_ids(r.report->outliers) : std::string("-"));
  return out.str();
}

inline void write_report(std::ostream& out, const std::vector<QueryResult>& results) {
  for (const auto& r : results) out << format_result(r) << '\n';
}

inline void write_metrics_csv(std::ostream& out, const Metrics& m, bool timestamps) {
  out << "round,messages,bytes,seed_regens,probes\n";
  for (const auto& r : m.rounds) {
    out << r.round << ',' << r.messages << ',' << r.bytes << ',' << r.seed_regens << ',' << r.probes << '\n';
  }
  auto t = m.totals();
  out << "# total," << t.messages << ',' << t.bytes << ',' << t.seed_regens << ',' << t.probes << '\n';
  out << "# reaggregations=" << t.reaggregations << " verify_ops=" << t.verify_ops << " path_cost=" << t.path_cost
      << '\n';
  if (timestamps) out << "# wall_us=" << t.wall_us << '\n';
}

inline void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "n,trials,mean_probes,max_probes,mean_depth,mean_messages\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.4f,%llu,%.4f,%.2f\n", r.n, r.trials, r.mean_probes,
                  static_cast<unsigned long long>(r.max_probes), r.mean_depth, r.mean_messages);
    out << buf;
  }
}

}  // namespace cagg
