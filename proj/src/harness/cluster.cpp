// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/harness/cluster.hpp"

#include "bizur/assert.hpp"

namespace bizur::harness {

Cluster::Cluster(sim::Simulation& sim, ClusterOptions opt,
                 LeaderObserver* observer, std::vector<sim::HostId> hosts)
    : sim_(sim), opt_(opt), observer_(observer), hosts_(std::move(hosts)) {
  if (hosts_.empty()) {
    for (uint32_t i = 0; i < opt_.servers; ++i) hosts_.push_back(sim_.add_host());
  }
  BIZUR_ASSERT(hosts_.size() == opt_.servers, "host count mismatch");

  for (uint32_t i = 0; i < opt_.servers; ++i) {
    addrs_.push_back(sim_.new_endpoint(hosts_[i]));
    stores_.push_back(std::make_unique<MemoryStore>());
  }
  desc_.instance_id = opt_.instance_id;
  desc_.shard = opt_.shard;
  desc_.members = addrs_;
  desc_.mode =
      opt_.start_in_reconfig ? InstanceMode::Reconfig : InstanceMode::Normal;

  nodes_.resize(opt_.servers);
  for (uint32_t i = 0; i < opt_.servers; ++i) rebuild(i);
}

NodeConfig Cluster::node_config(size_t i) const {
  NodeConfig cfg;
  cfg.instance_id = opt_.instance_id;
  cfg.shard = opt_.shard;
  cfg.self = addrs_[i];
  cfg.members = addrs_;
  cfg.num_buckets = opt_.num_buckets;
  cfg.quorum_timeout = opt_.quorum_timeout;
  cfg.quorum_retransmit = opt_.quorum_retransmit;
  cfg.sweep_interval = opt_.sweep_interval;
  cfg.iterate_batch = opt_.iterate_batch;
  cfg.persist = opt_.persist;
  cfg.start_in_reconfig = opt_.start_in_reconfig;
  cfg.copy_source = opt_.copy_source;
  cfg.controller = opt_.controller;
  cfg.fault = opt_.fault;
  return cfg;
}

void Cluster::rebuild(size_t i) {
  nodes_[i] = std::make_unique<NodeInstance>(sim_, node_config(i),
                                             stores_[i].get(), observer_);
  sim_.bind(addrs_[i], nodes_[i].get());
}

std::optional<size_t> Cluster::leader_index() const {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (sim_.endpoint_alive(addrs_[i]) && nodes_[i]->is_leader()) return i;
  }
  return std::nullopt;
}

NodeInstance* Cluster::leader() {
  auto i = leader_index();
  return i ? nodes_[*i].get() : nullptr;
}

void Cluster::crash(size_t i) { sim_.crash(hosts_[i]); }

void Cluster::crash_recover(size_t i, SimTime recover_after) {
  sim_.crash_recover(hosts_[i], recover_after, [this, i]() { rebuild(i); });
}

bool Cluster::crash_leader() {
  auto i = leader_index();
  if (!i) return false;
  crash(*i);
  return true;
}

bool Cluster::crash_recover_leader(SimTime recover_after) {
  auto i = leader_index();
  if (!i) return false;
  crash_recover(*i, recover_after);
  return true;
}

void Cluster::retire() {
  for (ServerId a : addrs_) sim_.unbind(a);
}

uint64_t Cluster::total_write_rounds() const {
  uint64_t n = 0;
  for (const auto& node : nodes_) n += node->metrics().write_rounds;
  return n;
}

uint64_t Cluster::total_ops_executed_draining() const {
  uint64_t n = 0;
  for (const auto& node : nodes_) n += node->metrics().ops_executed_draining;
  return n;
}

uint64_t Cluster::total_client_ops() const {
  uint64_t n = 0;
  for (const auto& node : nodes_) n += node->metrics().client_ops;
  return n;
}

}  // namespace bizur::harness
