// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bizur/checker/checker.hpp"
#include "bizur/checker/history.hpp"
#include "bizur/checker/workload.hpp"
#include "bizur/client/client.hpp"
#include "bizur/harness/cluster.hpp"
#include "bizur/node/node.hpp"
#include "bizur/reconfig/controller.hpp"
#include "bizur/reconfig/shard_map.hpp"
#include "bizur/sim/simulation.hpp"

namespace bizur::harness {

struct FaultEvent {
  enum class Kind {
    CrashLeader,
    Crash,
    SetDropRate,
    Partition,
    Heal,
    DelayBucket,
    Reconfig,
    // Partition the shard's current leader plus `followers` companions away
    // from the rest (manufactures stranded in-flight writes).
    IsolateLeader,
  };
  Kind kind = Kind::CrashLeader;
  SimTime at = 0;
  uint32_t shard = 0;
  uint32_t server = 0;        // Crash: server index within the shard
  SimTime recover_after = 0;  // 0 = crash-stop
  double rate = 0.0;          // SetDropRate
  std::vector<std::vector<uint32_t>> groups;  // Partition: host indices
  uint32_t bucket = 0;                        // DelayBucket
  SimTime extra_delay = 0;
  uint32_t followers = 1;  // IsolateLeader companions
  std::vector<uint32_t> new_servers;  // Reconfig: host indices (grown on demand)
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 1;
  uint32_t servers = 3;
  uint32_t shards = 1;
  uint32_t buckets_per_shard = 64;
  bool persist = true;

  uint32_t clients = 8;
  uint32_t keys = 64;
  checker::OpMix mix;
  checker::KeyDist dist = checker::KeyDist::Uniform;
  double zipf_s = 1.0;
  uint32_t value_size = 16;

  SimTime duration = sim_sec(10);
  double drop_rate = 0.0;
  SimTime latency_min = sim_us(500);
  SimTime latency_max = sim_ms(2);
  SimTime detection_timeout = sim_ms(100);
  SimTime quorum_timeout = sim_ms(50);
  SimTime quorum_retransmit = sim_ms(15);
  SimTime client_retransmit = sim_ms(20);
  SimTime election_token_period = sim_ms(500);
  SimTime sweep_interval = sim_ms(5);
  uint32_t iterate_batch = 0;
  NodeFault fault = NodeFault::None;
  double chaos_rate = 0.0;
  SimTime chaos_delay_max = sim_ms(5);

  bool check = false;
  bool trace = false;
  std::vector<FaultEvent> faults;

  // Optional parameter sweeps, expanded by the CLI into one run per value.
  std::vector<uint32_t> sweep_keys;
  std::vector<double> sweep_drop;
};

// Parses the documented JSON schema; unknown fields are errors.
std::optional<ScenarioConfig> parse_scenario(const std::string& json_text,
                                             std::string* error);

// A fully assembled simulation: per-shard instances, clients, the
// reconfiguration controller and the leader-uniqueness observer.
class World {
 public:
  World(sim::Simulation& sim, ScenarioConfig cfg);

  sim::Simulation& sim() { return sim_; }
  const ScenarioConfig& config() const { return cfg_; }
  LeaderObserver& observer() { return observer_; }
  ShardMap& shard_map() { return shard_map_; }

  Cluster& instance(uint32_t shard);
  Cluster* old_instance(uint32_t shard);
  ClientActor& client(uint32_t i) { return *clients_[i]; }
  uint32_t num_clients() const { return static_cast<uint32_t>(clients_.size()); }

  void start_workload(checker::History* history, SimTime stop_at);
  void apply_fault(const FaultEvent& f);
  void schedule_faults();

  bool start_reconfig(uint32_t shard, const std::vector<uint32_t>& host_indices);
  bool reconfig_complete(uint32_t shard) const;
  ReconfigController& controller() { return *controller_; }

  // Extra per-message delay for one bucket's quorum traffic.
  void delay_bucket(uint32_t bucket, SimTime extra);

  sim::HostId server_host(uint32_t index);

 private:
  ClusterOptions instance_options(uint32_t shard);

  sim::Simulation& sim_;
  ScenarioConfig cfg_;
  LeaderObserver observer_;
  ShardMap shard_map_;
  InstanceId next_instance_id_ = 1;

  std::vector<sim::HostId> server_hosts_;
  sim::HostId aux_host_;  // clients + controller

  std::vector<std::unique_ptr<Cluster>> instances_;  // kept for inspection
  std::map<uint32_t, Cluster*> active_;
  std::map<uint32_t, Cluster*> old_;
  std::map<uint32_t, bool> reconfig_done_;

  ServerId controller_addr_;
  std::unique_ptr<ReconfigController> controller_;
  std::vector<std::unique_ptr<ClientActor>> clients_;

  std::map<uint32_t, SimTime> bucket_delays_;
  bool delay_filter_installed_ = false;
};

struct SecondRow {
  uint64_t ops = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
};

struct ScenarioResult {
  std::string csv;
  std::string trace;
  checker::History history;
  std::optional<checker::Verdict> verdict;
  std::vector<std::string> observer_violations;
  uint64_t leader_marks = 0;
  uint64_t invoked = 0;
  uint64_t acked = 0;
  std::vector<SecondRow> per_second;
  double throughput_ops = 0.0;  // acked ops per simulated second
  double latency_mean_ms = 0.0;
  double latency_p99_ms = 0.0;
  int exit_code = 0;
};

// Executes the scenario to its configured virtual duration (plus a grace
// window for in-flight operations) and aggregates metrics from the history.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Per-second throughput / latency rows; header
// t_sec,ops_completed,latency_mean_ms,latency_p99_ms.
std::string metrics_csv(const checker::History& history, SimTime duration);

std::vector<SecondRow> per_second_rows(const checker::History& history,
                                       SimTime duration);

}  // namespace bizur::harness
