// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <functional>
#include <set>
#include <vector>

#include "bizur/reconfig/descriptor.hpp"
#include "bizur/sim/simulation.hpp"

namespace bizur {

// Harness-side hooks the controller drives. Actor creation and retirement
// live in the harness because it owns the objects.
struct ControllerCallbacks {
  // Creates the new instance's node actors (in reconfig state, copying from
  // `old_desc`) and returns its descriptor.
  std::function<InstanceDescriptor(uint32_t shard,
                                   const std::vector<sim::HostId>& hosts,
                                   const InstanceDescriptor& old_desc)>
      spawn_instance;
  // Removes the old instance's endpoints.
  std::function<void(const InstanceDescriptor& old_desc)> retire_instance;
  std::function<bool(ServerId)> endpoint_alive;
  std::function<std::vector<ServerId>()> client_endpoints;
  // Local (harness-side) descriptor publication, e.g. into a ShardMap.
  std::function<void(const InstanceDescriptor&)> on_descriptor;
  std::function<void(uint32_t shard)> on_complete;
};

// Sequential reconfiguration driver:
//   1. spawn the new instance in reconfig state,
//   2. drain the old one (retried command; every live member must ack),
//   3. publish the new descriptor to every client,
//   4. keep the new instance electing until it reports the copy complete,
//   5. retire the old instance after a quiescence grace period.
// One reconfiguration at a time; a second request while busy is rejected.
class ReconfigController : public sim::Actor {
 public:
  ReconfigController(sim::Transport& transport, ServerId self,
                     SimTime detection_timeout, ControllerCallbacks cbs);

  bool start_reconfig(uint32_t shard, std::vector<sim::HostId> new_hosts,
                      const InstanceDescriptor& old_desc);

  void on_envelope(Envelope env) override;

  bool busy() const { return phase_ != Phase::Idle; }
  const InstanceDescriptor& new_descriptor() const { return new_desc_; }
  const InstanceDescriptor& old_descriptor() const { return old_desc_; }

 private:
  enum class Phase { Idle, Draining, Publishing, Copying, Grace };

  void drain_tick();
  void publish_tick();
  void election_tick();
  void enter_grace();

  sim::Transport& transport_;
  ServerId self_;
  SimTime detection_timeout_;
  ControllerCallbacks cbs_;

  Phase phase_ = Phase::Idle;
  uint32_t shard_ = 0;
  InstanceDescriptor old_desc_;
  InstanceDescriptor new_desc_;
  std::set<ServerId> awaiting_;
  size_t election_rr_ = 0;
  sim::TimerHandle tick_timer_;
};

}  // namespace bizur
