#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <thread>
#include <tuple>
#include <vector>

#include "cagg/adversary.hpp"
#include "cagg/basestation.hpp"
#include "cagg/node.hpp"
#include "cagg/packet.hpp"
#include "cagg/scenario.hpp"
#include "cagg/topology.hpp"

namespace cagg {

/// One message (or timer) in flight. Delivery order is (tick, from, to, seq).
struct Event {
  std::uint64_t tick = 0;
  NodeId from = 0;
  NodeId to = 0;
  std::uint64_t seq = 0;
  Bytes payload;

  auto key() const { return std::tie(tick, from, to, seq); }
};

struct RoundMetrics {
  std::uint64_t round = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::uint64_t seed_regens = 0;
  std::uint64_t probes = 0;
  std::uint64_t reaggregations = 0;
  std::uint64_t verify_ops = 0;
  std::uint64_t path_cost = 0;  // sum of depths of reporting nodes
  std::uint64_t wall_us = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

struct Metrics {
  std::vector<RoundMetrics> rounds;

  RoundMetrics totals() const {
    RoundMetrics t;
    for (const auto& r : rounds) {
      t.messages += r.messages;
      t.bytes += r.bytes;
      t.seed_regens += r.seed_regens;
      t.probes += r.probes;
      t.reaggregations += r.reaggregations;
      t.verify_ops += r.verify_ops;
      t.path_cost += r.path_cost;
      t.wall_us += r.wall_us;
    }
    return t;
  }
};

struct SimulationResult {
  std::vector<QueryResult> results;
  Metrics metrics;
  // Honest (pre-forgery) encoded reading of every node, per round; index 0 unused.
  std::vector<std::vector<DomainValue>> readings;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Ground-truth environment: the reading node `id` senses in `round`.
inline DomainValue sensor_reading(std::uint64_t seed, NodeId id, std::uint64_t round, const DomainParams& domain) {
  auto h = splitmix64(splitmix64(splitmix64(seed) ^ id) ^ round);
  return DomainValue(h % (domain.max_raw() + 1));
}

/// Deterministic discrete-event network: one BS, one SensorNode per sensor,
/// unit per-hop latency.
class Simulator {
 public:
  explicit Simulator(Scenario sc) : sc_(std::move(sc)) {
    sc_.validate();
    tree_ = build_tree(sc_.build_graph());
    sc_.plan.validate(tree_);
    for (const auto& [id, _] : sc_.offline) {
      if (id == kBaseStation || id >= tree_.vertex_count()) {
        throw Error(Errc::scenario_invalid, "offline node " + std::to_string(id) + " is not provisioned");
      }
    }
    prov_ = provision(tree_, sc_.seed, sc_.domain);
    BaseStation::Config bcfg;
    bcfg.domain = sc_.domain;
    bcfg.force_attest = sc_.force_attest;
    bcfg.audit_probability = sc_.audit_probability;
    bcfg.audit_seed = splitmix64(sc_.seed ^ 0xa0d17ULL);
    bs_.emplace(tree_, prov_, bcfg);

    const auto height = tree_.height();
    nodes_.reserve(tree_.vertex_count());
    for (NodeId id = 0; id < tree_.vertex_count(); ++id) {
      SensorNode::Config cfg;
      cfg.id = id;
      cfg.parent = tree_.parent(id);
      cfg.children = tree_.children(id);
      cfg.domain = sc_.domain;
      for (NodeId c : cfg.children) cfg.child_keys[c] = prov_.edge_key(c);
      if (id != kBaseStation) {
        cfg.secrets = prov_.nodes[id];
        cfg.uplink_key = prov_.edge_key(id);
        cfg.timeout_ticks = sc_.timeout_factor * (height - tree_.depth(id) + 1);
      }
      const auto seed = sc_.seed;
      const auto domain = sc_.domain;
      nodes_.emplace_back(std::move(cfg), [seed, id, domain](std::uint64_t round) {
        return sensor_reading(seed, id, round, domain);
      });
    }
    apply_plan(sc_.plan, nodes_, sc_.domain);
  }

  const Scenario& scenario() const { return sc_; }
  const Tree& tree() const { return tree_; }
  const Provisioning& provisioning() const { return prov_; }
  BaseStation& base_station() { return *bs_; }
  std::vector<SensorNode>& nodes() { return nodes_; }
  std::uint64_t tick() const { return tick_; }

  SimulationResult run() {
    SimulationResult out;
    for (std::uint64_t r = 1; r <= sc_.rounds; ++r) {
      out.results.push_back(run_round(r));
      out.metrics.rounds.push_back(last_metrics_);
      std::vector<DomainValue> readings(tree_.vertex_count());
      for (NodeId id = 1; id < tree_.vertex_count(); ++id) readings[id] = sensor_reading(sc_.seed, id, r, sc_.domain);
      out.readings.push_back(std::move(readings));
    }
    return out;
  }

  /// Query down, packets up, final verdict and (if needed) attestation.
  QueryResult run_round(std::uint64_t round) {
    auto started = std::chrono::steady_clock::now();
    RoundMetrics m;
    m.round = round;
    metrics_ = &m;
    const auto regen_before = bs_->seed_regenerations();
    const auto ops_before = bs_->verify_ops();

    auto q = bs_->disseminate(sc_.function, round);
    auto query = encode_query(q);
    for (NodeId c : tree_.children(kBaseStation)) send(kBaseStation, c, query);
    drain(round);

    Transport transport(*this, round);
    auto res = bs_->conclude_round(transport);

    for (NodeId id : res.participants) m.path_cost += tree_.depth(id);
    if (res.report) {
      m.probes = res.report->probes;
      m.reaggregations = res.report->reaggregations;
    }
    m.seed_regens = bs_->seed_regenerations() - regen_before;
    m.verify_ops = bs_->verify_ops() - ops_before;
    m.wall_us = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started).count());
    last_metrics_ = m;
    metrics_ = nullptr;
    return res;
  }

  const RoundMetrics& last_metrics() const { return last_metrics_; }

  bool is_offline(NodeId id, std::uint64_t round) const {
    auto it = sc_.offline.find(id);
    return it != sc_.offline.end() && round >= it->second;
  }

 private:
  class Transport : public ProbeTransport {
   public:
    Transport(Simulator& sim, std::uint64_t round) : sim_(sim), round_(round) {}

    // Probes and replies are routed over the tree: depth hops each way.
    std::optional<Bytes> request(NodeId target, ByteView probe) override {
      const auto hops = sim_.tree_.depth(target);
      sim_.account(hops, probe.size());
      sim_.tick_ += hops;
      if (sim_.is_offline(target, round_)) return std::nullopt;
      auto reply = sim_.nodes_[target].handle_probe(probe);
      sim_.account(hops, reply.size());
      sim_.tick_ += hops;
      return reply;
    }

   private:
    Simulator& sim_;
    std::uint64_t round_;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const { return a.key() > b.key(); }
  };

  void account(std::uint64_t messages, std::size_t bytes) {
    if (!metrics_) return;
    metrics_->messages += messages;
    metrics_->bytes += messages * bytes;
  }

  void send(NodeId from, NodeId to, Bytes payload, std::uint64_t delay = 1) {
    account(1, payload.size());
    queue_.push(Event{tick_ + delay, from, to, seq_++, std::move(payload)});
  }

  void schedule_timer(NodeId id, std::uint64_t delay) {
    queue_.push(Event{tick_ + delay, id, id, seq_++, encode_timer()});
  }

  void emit(SensorNode& node) {
    auto e = node.emit();
    send(node.id(), node.parent(), wrap_packet(e.wire));
  }

  void drain(std::uint64_t round) {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      tick_ = std::max(tick_, ev.tick);
      if (ev.to == kBaseStation) {
        bs_->receive_child_packet(ev.from, unwrap_packet(ev.payload));
        continue;
      }
      if (is_offline(ev.to, round)) continue;
      auto& node = nodes_[ev.to];
      switch (peek_type(ev.payload)) {
        case MsgType::query: {
          std::vector<NodeId> forward;
          try {
            forward = node.handle_query(decode_query(ev.payload));
          } catch (const Error& e) {
            if (e.code() != Errc::stale_round) throw;
            continue;
          }
          for (NodeId c : forward) send(node.id(), c, ev.payload);
          if (node.ready()) {
            emit(node);
          } else {
            schedule_timer(node.id(), node.config().timeout_ticks);
          }
          break;
        }
        case MsgType::packet:
          node.receive_child(ev.from, unwrap_packet(ev.payload));
          if (node.ready()) emit(node);
          break;
        case MsgType::timer:
          if (node.round_state() && node.round_state()->round == round && !node.emitted()) emit(node);
          break;
        default:
          throw Error(Errc::malformed_message, "unexpected message type in aggregation phase");
      }
    }
  }

  Scenario sc_;
  Tree tree_;
  Provisioning prov_;
  std::optional<BaseStation> bs_;
  std::vector<SensorNode> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t tick_ = 0;
  std::uint64_t seq_ = 0;
  RoundMetrics* metrics_ = nullptr;
  RoundMetrics last_metrics_;
};

inline SimulationResult run(const Scenario& sc) { return Simulator(sc).run(); }

// ---- scaling experiment ----

struct ScalingRow {
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean_probes = 0.0;
  std::uint64_t max_probes = 0;
  double mean_depth = 0.0;  // mean tree height
  double mean_messages = 0.0;
};

/// Single-compromise attestation runs: each trial builds a fresh tree of the
/// family, compromises one uniformly chosen node with a one-chain forgery,
/// and records the probes ComAtt needed.
inline std::vector<ScalingRow> measure_scaling(const std::vector<std::size_t>& sizes, std::size_t trials,
                                               std::uint64_t seed,
                                               GraphFamily family = GraphFamily::random_recursive) {
  std::vector<ScalingRow> rows;
  for (std::size_t n : sizes) {
    if (n == 0) throw Error(Errc::scenario_invalid, "network size must be positive");
    struct Trial {
      std::uint64_t probes = 0, height = 0, messages = 0;
    };
    std::vector<Trial> out(trials);
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t t = begin; t < trials; t += step) {
        Scenario sc;
        sc.family = family;
        sc.generator_nodes = n;
        sc.seed = splitmix64(seed ^ splitmix64(n) ^ (t * 0x51ed27ULL));
        sc.rounds = 1;
        auto victim = static_cast<NodeId>(1 + splitmix64(sc.seed ^ 0xc0ffeeULL) % n);
        sc.plan.add(victim, Behavior{BehaviorKind::forge_children, 1.0});
        Simulator sim(sc);
        auto res = sim.run_round(1);
        out[t].probes = res.report ? res.report->probes : 0;
        out[t].height = sim.tree().height();
        out[t].messages = sim.last_metrics().messages;
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), trials));
    if (workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    ScalingRow row;
    row.n = n;
    row.trials = trials;
    for (const auto& t : out) {
      row.mean_probes += static_cast<double>(t.probes);
      row.max_probes = std::max(row.max_probes, t.probes);
      row.mean_depth += static_cast<double>(t.height);
      row.mean_messages += static_cast<double>(t.messages);
    }
    if (trials > 0) {
      row.mean_probes /= static_cast<double>(trials);
      row.mean_depth /= static_cast<double>(trials);
      row.mean_messages /= static_cast<double>(trials);
    }
    rows.push_back(row);
  }
  return rows;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const double n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size()) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0) return f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  const double mean_y = sy / n;
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = f.slope * x[i] + f.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  f.r_squared = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace cagg
