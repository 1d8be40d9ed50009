// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "bizur/node/node.hpp"
#include "bizur/node/observer.hpp"
#include "bizur/node/store.hpp"
#include "bizur/sim/simulation.hpp"

namespace bizur::harness {

struct ClusterOptions {
  uint32_t servers = 3;
  uint32_t num_buckets = 64;
  bool persist = true;
  SimTime quorum_timeout = sim_ms(50);
  SimTime quorum_retransmit = sim_ms(15);
  SimTime sweep_interval = sim_ms(5);
  uint32_t iterate_batch = 0;
  NodeFault fault = NodeFault::None;

  InstanceId instance_id = 1;
  uint32_t shard = 0;
  bool start_in_reconfig = false;
  std::optional<InstanceDescriptor> copy_source;
  std::optional<ServerId> controller;
};

// One Bizur instance in a simulation: node actors, their durable stores and
// the restart plumbing. Stores live here, outside the actors, so a
// crash-recover rebuild finds them.
class Cluster {
 public:
  Cluster(sim::Simulation& sim, ClusterOptions opt, LeaderObserver* observer,
          std::vector<sim::HostId> hosts = {});

  const InstanceDescriptor& descriptor() const { return desc_; }
  size_t size() const { return nodes_.size(); }
  NodeInstance& node(size_t i) { return *nodes_[i]; }
  const NodeInstance& node(size_t i) const { return *nodes_[i]; }
  ServerId address(size_t i) const { return addrs_[i]; }
  sim::HostId host(size_t i) const { return hosts_[i]; }
  const std::vector<sim::HostId>& hosts() const { return hosts_; }

  std::optional<size_t> leader_index() const;
  NodeInstance* leader();

  void crash(size_t i);
  void crash_recover(size_t i, SimTime recover_after);
  bool crash_leader();  // crash-stop; false when no leader exists
  bool crash_recover_leader(SimTime recover_after);

  // Unbinds every endpoint; delivered messages die silently afterwards.
  void retire();

  uint64_t total_write_rounds() const;
  uint64_t total_ops_executed_draining() const;
  uint64_t total_client_ops() const;

 private:
  NodeConfig node_config(size_t i) const;
  void rebuild(size_t i);

  sim::Simulation& sim_;
  ClusterOptions opt_;
  LeaderObserver* observer_;
  std::vector<sim::HostId> hosts_;
  std::vector<ServerId> addrs_;
  std::vector<std::unique_ptr<MemoryStore>> stores_;
  std::vector<std::unique_ptr<NodeInstance>> nodes_;
  InstanceDescriptor desc_;
};

}  // namespace bizur::harness
