// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/reconfig/controller.hpp"

#include "bizur/assert.hpp"

namespace bizur {

namespace {
constexpr SimTime kControlRetry = sim_ms(25);
constexpr SimTime kElectionNudge = sim_ms(300);
}  // namespace

ReconfigController::ReconfigController(sim::Transport& transport, ServerId self,
                                       SimTime detection_timeout,
                                       ControllerCallbacks cbs)
    : transport_(transport),
      self_(self),
      detection_timeout_(detection_timeout),
      cbs_(std::move(cbs)) {}

bool ReconfigController::start_reconfig(uint32_t shard,
                                        std::vector<sim::HostId> new_hosts,
                                        const InstanceDescriptor& old_desc) {
  if (busy()) return false;  // one membership change at a time
  shard_ = shard;
  old_desc_ = old_desc;
  new_desc_ = cbs_.spawn_instance(shard, new_hosts, old_desc_);
  BIZUR_ASSERT(new_desc_.instance_id > old_desc_.instance_id,
               "new instance must have a newer epoch");
  new_desc_.mode = InstanceMode::Reconfig;

  old_desc_.mode = InstanceMode::Draining;
  phase_ = Phase::Draining;
  awaiting_.clear();
  for (ServerId s : old_desc_.members) awaiting_.insert(s);
  drain_tick();
  return true;
}

void ReconfigController::drain_tick() {
  if (phase_ != Phase::Draining) return;
  // Skip members that crashed; a dead server processes nothing either way.
  for (auto it = awaiting_.begin(); it != awaiting_.end();) {
    if (!cbs_.endpoint_alive(*it))
      it = awaiting_.erase(it);
    else
      ++it;
  }
  if (awaiting_.empty()) {
    phase_ = Phase::Publishing;
    for (ServerId c : cbs_.client_endpoints()) awaiting_.insert(c);
    if (cbs_.on_descriptor) cbs_.on_descriptor(new_desc_);
    publish_tick();
    return;
  }
  for (ServerId s : awaiting_) {
    transport_.send(Envelope{transport_.next_msg_id(), self_, s,
                             DrainCmd{new_desc_}});
  }
  tick_timer_ =
      transport_.set_timer(self_, kControlRetry, [this]() { drain_tick(); });
}

void ReconfigController::publish_tick() {
  if (phase_ != Phase::Publishing) return;
  if (awaiting_.empty()) {
    phase_ = Phase::Copying;
    election_rr_ = 0;
    election_tick();
    return;
  }
  for (ServerId c : awaiting_) {
    transport_.send(Envelope{transport_.next_msg_id(), self_, c,
                             DescriptorUpdate{new_desc_}});
  }
  tick_timer_ =
      transport_.set_timer(self_, kControlRetry, [this]() { publish_tick(); });
}

void ReconfigController::election_tick() {
  if (phase_ != Phase::Copying) return;
  // The copy sweep only runs under a leader; nudge the new instance until
  // it reports completion (client traffic usually elects one first).
  ServerId target =
      new_desc_.members[election_rr_ % new_desc_.members.size()];
  election_rr_++;
  if (cbs_.endpoint_alive(target)) {
    transport_.send(Envelope{transport_.next_msg_id(), self_, target,
                             TriggerElection{}});
  }
  tick_timer_ = transport_.set_timer(self_, kElectionNudge,
                                     [this]() { election_tick(); });
}

void ReconfigController::enter_grace() {
  phase_ = Phase::Grace;
  new_desc_.mode = InstanceMode::Normal;
  if (cbs_.on_descriptor) cbs_.on_descriptor(new_desc_);
  // Let in-flight old-instance internal messages die out before removal.
  transport_.set_timer(self_, 2 * detection_timeout_, [this]() {
    old_desc_.mode = InstanceMode::Retired;
    if (cbs_.retire_instance) cbs_.retire_instance(old_desc_);
    phase_ = Phase::Idle;
    if (cbs_.on_complete) cbs_.on_complete(shard_);
  });
}

void ReconfigController::on_envelope(Envelope env) {
  if (std::holds_alternative<DrainAck>(env.payload)) {
    if (phase_ == Phase::Draining) {
      awaiting_.erase(env.from);
      if (awaiting_.empty()) {
        transport_.cancel_timer(tick_timer_);
        drain_tick();
      }
    }
    return;
  }
  if (std::holds_alternative<DescriptorAck>(env.payload)) {
    if (phase_ == Phase::Publishing) {
      awaiting_.erase(env.from);
      if (awaiting_.empty()) {
        transport_.cancel_timer(tick_timer_);
        publish_tick();
      }
    }
    return;
  }
  if (auto* done = std::get_if<CopyComplete>(&env.payload)) {
    // Always ack so the leader stops resending.
    transport_.send(
        Envelope{env.msg_id, self_, env.from, CopyCompleteAck{}});
    if (phase_ == Phase::Copying && done->shard == shard_ &&
        done->instance_id == new_desc_.instance_id) {
      transport_.cancel_timer(tick_timer_);
      enter_grace();
    }
    return;
  }
}

}  // namespace bizur
