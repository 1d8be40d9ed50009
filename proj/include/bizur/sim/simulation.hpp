// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "bizur/envelope.hpp"
#include "bizur/sim/rng.hpp"
#include "bizur/sim/transport.hpp"
#include "bizur/types.hpp"

namespace bizur::sim {

struct HostId {
  uint32_t value = 0;
  auto operator<=>(const HostId&) const = default;
};

struct SimConfig {
  uint64_t seed = 1;
  // Per-message one-way latency, uniform in [min, max].
  SimTime latency_min = sim_us(500);
  SimTime latency_max = sim_ms(2);
  double drop_rate = 0.0;  // per directed message
  // Failure-detection timeout used by clients when waiting on a server.
  SimTime detection_timeout = sim_ms(100);
  // Chaos yield points: probability that a named point defers its
  // continuation, and the maximum injected delay.
  double chaos_rate = 0.0;
  SimTime chaos_delay_max = sim_ms(5);
};

// A deliverable endpoint: node instance, client or controller.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void on_envelope(Envelope env) = 0;
};

struct NetCounters {
  uint64_t sent = 0;
  uint64_t delivered = 0;
  uint64_t dropped = 0;       // drop_rate and partitions
  uint64_t dead_dropped = 0;  // destination host down or endpoint unbound
};

// Seeded discrete-event simulator: virtual clock, message scheduling with
// loss and partitions, crash-stop / crash-recover hosts, owned timers.
// Strictly single-threaded; one RNG stream consumed in event order keeps
// identical (seed, scenario) pairs byte-identical.
class Simulation : public Transport {
 public:
  explicit Simulation(SimConfig cfg);

  // ---- topology ----
  HostId add_host();
  // Two-phase spawn so actors can learn their own address in constructors.
  ServerId new_endpoint(HostId host);
  void bind(ServerId endpoint, Actor* actor);
  ServerId spawn(HostId host, Actor* actor);
  void unbind(ServerId endpoint);
  bool bound(ServerId endpoint) const;
  bool host_alive(HostId host) const;
  bool endpoint_alive(ServerId endpoint) const;
  HostId host_of(ServerId endpoint) const;

  // ---- transport ----
  SimTime now() const override { return clock_; }
  uint64_t next_msg_id() override { return ++msg_id_seq_; }
  uint64_t rand64() override { return rng_.next(); }
  void send(Envelope env) override;
  TimerHandle set_timer(ServerId owner, SimTime delay,
                        std::function<void()> fn) override;
  void cancel_timer(TimerHandle h) override;
  void chaos_point(const char* point, ServerId owner,
                   std::function<void()> fn) override;

  // Harness-level event, not tied to an endpoint (fault timelines).
  void schedule(SimTime delay, const char* tag, std::function<void()> fn);

  // ---- execution ----
  // Executes exactly one event. Returns false when no event is queued.
  bool step();
  void run_until(SimTime t);
  void run_for(SimTime d) { run_until(clock_ + d); }
  // Runs until the queue empties; returns the number of executed events or
  // nullopt when the budget was exhausted first (possible livelock).
  std::optional<size_t> run_to_quiescence(size_t max_events);

  // ---- faults ----
  void crash(HostId host);
  // Crash now, restart after `delay`. `on_restart` runs at restart time so
  // the harness can rebuild actors from their persistent stores.
  void crash_recover(HostId host, SimTime delay,
                     std::function<void()> on_restart);
  void set_drop_rate(double rate);
  double drop_rate() const { return cfg_.drop_rate; }
  // Blocks traffic between every pair of hosts in different groups; hosts
  // absent from all groups are unaffected.
  void partition(const std::vector<std::vector<HostId>>& groups);
  void block(HostId a, HostId b);
  void heal();
  // Extra per-message delay (e.g. to slow one bucket's quorum traffic).
  void set_delay_filter(std::function<SimTime(const Envelope&)> filter);
  void set_chaos(double rate, SimTime delay_max);

  // ---- observability ----
  const std::map<std::string, NetCounters>& net_stats() const {
    return stats_;
  }
  uint64_t delivered(const std::string& tag) const;
  void set_trace_sink(std::string* sink) { trace_ = sink; }
  Rng& rng() { return rng_; }
  const SimConfig& config() const { return cfg_; }

 private:
  struct Event {
    SimTime at = 0;
    uint64_t seq = 0;
    std::function<void()> run;
  };
  struct EventCmp {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };
  struct HostRec {
    bool alive = true;
    uint64_t generation = 0;
  };
  struct EndpointRec {
    Actor* actor = nullptr;
    HostId host;
  };
  struct TimerRec {
    ServerId owner;
    uint64_t host_generation = 0;
  };

  void push(SimTime at, std::function<void()> fn);
  void deliver(Envelope env);
  bool blocked(HostId a, HostId b) const;
  void trace_line(const char* what, const Envelope& env, SimTime when);

  SimConfig cfg_;
  Rng rng_;
  SimTime clock_ = 0;
  uint64_t event_seq_ = 0;
  uint64_t msg_id_seq_ = 0;
  uint64_t timer_seq_ = 0;
  uint32_t next_endpoint_ = 1;
  uint32_t next_host_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventCmp> queue_;
  std::vector<HostRec> hosts_;
  std::unordered_map<uint32_t, EndpointRec> endpoints_;
  std::unordered_map<uint64_t, TimerRec> timers_;
  std::set<std::pair<uint32_t, uint32_t>> blocked_;
  std::function<SimTime(const Envelope&)> delay_filter_;
  std::map<std::string, NetCounters> stats_;
  std::string* trace_ = nullptr;
};

}  // namespace bizur::sim
