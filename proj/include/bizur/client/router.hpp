// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <functional>
#include <optional>
#include <set>

#include "bizur/envelope.hpp"
#include "bizur/reconfig/descriptor.hpp"
#include "bizur/sim/transport.hpp"

namespace bizur {

struct RouterOptions {
  // Failure-detection timeout: how long one attempt waits before the target
  // is presumed dead or leaderless.
  SimTime request_timeout = sim_ms(100);
  // The request envelope is re-sent at this cadence inside one attempt;
  // the server's reply cache keeps re-execution out.
  SimTime retransmit_interval = sim_ms(20);
  // Election trigger budget: one token, refilled once per period.
  SimTime election_token_period = sim_ms(500);
  // Cap on clean-failure retries; 0 means retry until the caller stops.
  uint32_t retry_cap = 0;
  bool internal = false;  // reconfiguration copy traffic
};

enum class SubmitStatus {
  Ok,                // definitive response in `response`
  Indeterminate,     // mutation may or may not have been applied
  RetriesExhausted,  // retry cap hit; the operation never applied
  Invalid,           // request violates key/value size caps
};

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Ok;
  KvResponse response;
};

// Request routing against one Bizur instance: track the presumed leader,
// walk the members round-robin on NotALeader or timeout, trigger an
// election after a full fruitless cycle (token-limited), follow
// reconfiguration redirects. One outstanding request at a time.
//
// Mutations are retried only after failures that provably did not apply
// (clean NotALeader, redirects). A timeout or an attempted NotALeader
// resolves the mutation as indeterminate; blindly re-running it could
// apply it twice.
class RequestRouter {
 public:
  RequestRouter(sim::Transport& transport, ServerId self,
                InstanceDescriptor target, RouterOptions opt);

  void submit(KvRequest req, std::function<void(SubmitResult)> done);
  // Returns true when the envelope answered the outstanding attempt.
  bool on_envelope(const Envelope& env);
  // Adopts a descriptor with a newer epoch; older ones are ignored.
  void retarget(const InstanceDescriptor& desc);

  bool idle() const { return !active_; }
  const InstanceDescriptor& target() const { return target_; }
  std::optional<ServerId> presumed_leader() const { return presumed_leader_; }
  uint64_t elections_triggered() const { return elections_triggered_; }

 private:
  void attempt();
  void arm_attempt_retransmit(uint64_t id);
  void note_failure(bool timed_out, std::optional<ServerId> hint);
  void attempt_failed(bool timed_out, std::optional<ServerId> hint);
  void finish(SubmitResult r);
  ServerId pick_target();
  void maybe_trigger_election();
  bool take_election_token();
  void cancel_timers();

  sim::Transport& transport_;
  ServerId self_;
  InstanceDescriptor target_;
  RouterOptions opt_;

  std::optional<ServerId> presumed_leader_;
  size_t rr_cursor_ = 0;
  uint32_t fail_streak_ = 0;
  // Servers that timed out since the last success (presumed dead): hints
  // pointing at them are ignored, and target picks skip them while live
  // alternatives remain. Servers answering NotALeader stay eligible.
  std::set<ServerId> timed_out_;
  uint32_t clean_retries_ = 0;
  double tokens_ = 1.0;
  SimTime last_refill_ = 0;
  uint64_t elections_triggered_ = 0;

  bool active_ = false;
  KvRequest req_;
  std::function<void(SubmitResult)> done_;
  uint64_t msg_id_ = 0;
  ServerId attempt_target_;
  Envelope attempt_env_;
  sim::TimerHandle timeout_timer_;
  sim::TimerHandle retransmit_timer_;
};

}  // namespace bizur
