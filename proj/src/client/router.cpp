// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/client/router.hpp"

#include <algorithm>

#include "bizur/assert.hpp"

namespace bizur {

RequestRouter::RequestRouter(sim::Transport& transport, ServerId self,
                             InstanceDescriptor target, RouterOptions opt)
    : transport_(transport),
      self_(self),
      target_(std::move(target)),
      opt_(opt),
      last_refill_(transport.now()) {
  BIZUR_ASSERT(!target_.members.empty(), "router needs members");
}

void RequestRouter::retarget(const InstanceDescriptor& desc) {
  if (desc.instance_id < target_.instance_id) return;
  bool changed = desc.instance_id > target_.instance_id;
  target_ = desc;
  if (changed) {
    presumed_leader_.reset();
    rr_cursor_ = 0;
    fail_streak_ = 0;
    timed_out_.clear();
  }
}

ServerId RequestRouter::pick_target() {
  if (presumed_leader_ && !timed_out_.count(*presumed_leader_) &&
      std::count(target_.members.begin(), target_.members.end(),
                 *presumed_leader_)) {
    return *presumed_leader_;
  }
  // Walk the ring from the cursor, preferring servers that have not failed
  // since the last success; if every server failed, take the cursor as-is.
  size_t n = target_.members.size();
  for (size_t i = 0; i < n; ++i) {
    ServerId candidate = target_.members[(rr_cursor_ + i) % n];
    if (!timed_out_.count(candidate)) return candidate;
  }
  return target_.members[rr_cursor_ % n];
}

void RequestRouter::submit(KvRequest req, std::function<void(SubmitResult)> done) {
  BIZUR_ASSERT(!active_, "one outstanding request per router");
  if (req.key.size() > kMaxKeyBytes || req.value.size() > kMaxValueBytes) {
    done(SubmitResult{SubmitStatus::Invalid, {}});
    return;
  }
  active_ = true;
  req_ = std::move(req);
  req_.internal = opt_.internal;
  done_ = std::move(done);
  clean_retries_ = 0;
  attempt();
}

void RequestRouter::attempt() {
  msg_id_ = transport_.next_msg_id();
  attempt_target_ = pick_target();
  req_.epoch = target_.instance_id;
  attempt_env_ = Envelope{msg_id_, self_, attempt_target_, ClientRequest{req_}};
  transport_.send(attempt_env_);

  if (opt_.retransmit_interval > 0 &&
      opt_.retransmit_interval < opt_.request_timeout) {
    arm_attempt_retransmit(msg_id_);
  }

  timeout_timer_ = transport_.set_timer(
      self_, opt_.request_timeout, [this, id = msg_id_]() {
        if (!active_ || msg_id_ != id) return;
        transport_.cancel_timer(retransmit_timer_);
        if (is_mutation(req_.op)) {
          // No response at all: the request (or its ack) may be in flight or
          // already applied; re-running it could apply it twice. The routing
          // state still has to learn, or the next mutation would pay the
          // same timeout against the same silent server.
          note_failure(true, std::nullopt);
          finish(SubmitResult{SubmitStatus::Indeterminate, {}});
          return;
        }
        attempt_failed(true, std::nullopt);
      });
}

void RequestRouter::arm_attempt_retransmit(uint64_t id) {
  retransmit_timer_ =
      transport_.set_timer(self_, opt_.retransmit_interval, [this, id]() {
        if (!active_ || msg_id_ != id) return;
        transport_.send(attempt_env_);
        arm_attempt_retransmit(id);
      });
}

void RequestRouter::note_failure(bool timed_out,
                                 std::optional<ServerId> hint) {
  fail_streak_++;
  if (timed_out) timed_out_.insert(attempt_target_);
  // Followers keep hinting at a leader until they vote again; a hint at a
  // server that went silent would just re-pay its timeout.
  if (hint && *hint != attempt_target_ && !timed_out_.count(*hint) &&
      std::count(target_.members.begin(), target_.members.end(), *hint)) {
    presumed_leader_ = hint;
  } else {
    presumed_leader_.reset();
    rr_cursor_ = (rr_cursor_ + 1) % target_.members.size();
  }
  if (fail_streak_ >= target_.members.size()) {
    // A full cycle found no leader; ask the next server to run an election,
    // budget permitting, and keep cycling.
    maybe_trigger_election();
    fail_streak_ = 0;
  }
}

void RequestRouter::attempt_failed(bool timed_out,
                                   std::optional<ServerId> hint) {
  cancel_timers();
  clean_retries_++;
  note_failure(timed_out, hint);
  if (opt_.retry_cap != 0 && clean_retries_ > opt_.retry_cap) {
    finish(SubmitResult{SubmitStatus::RetriesExhausted, {}});
    return;
  }
  attempt();
}

bool RequestRouter::take_election_token() {
  SimTime now = transport_.now();
  double refill = static_cast<double>(now - last_refill_) /
                  static_cast<double>(opt_.election_token_period);
  tokens_ = std::min(1.0, tokens_ + refill);
  last_refill_ = now;
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void RequestRouter::maybe_trigger_election() {
  if (!take_election_token()) return;
  // Deterministic common choice: the first member (in membership order) not
  // known to be dead. Clients with the same view nominate the same
  // candidate, which keeps concurrent candidacies rare.
  size_t n = target_.members.size();
  ServerId target = target_.members[rr_cursor_ % n];
  for (size_t i = 0; i < n; ++i) {
    ServerId candidate = target_.members[i];
    if (!timed_out_.count(candidate)) {
      target = candidate;
      break;
    }
  }
  elections_triggered_++;
  transport_.send(
      Envelope{transport_.next_msg_id(), self_, target, TriggerElection{}});
}

void RequestRouter::cancel_timers() {
  transport_.cancel_timer(timeout_timer_);
  transport_.cancel_timer(retransmit_timer_);
  timeout_timer_ = {};
  retransmit_timer_ = {};
}

void RequestRouter::finish(SubmitResult r) {
  cancel_timers();
  active_ = false;
  auto done = std::move(done_);
  done_ = nullptr;
  done(std::move(r));
}

bool RequestRouter::on_envelope(const Envelope& env) {
  if (!active_ || env.msg_id != msg_id_) return false;
  const auto* cr = std::get_if<ClientResponse>(&env.payload);
  if (!cr) return false;
  const KvResponse& resp = cr->resp;

  switch (resp.kind) {
    case KvResponse::Kind::NotALeader:
      if (resp.attempted && is_mutation(req_.op)) {
        finish(SubmitResult{SubmitStatus::Indeterminate, {}});
      } else {
        attempt_failed(false, resp.leader_hint);
      }
      return true;
    case KvResponse::Kind::ReconfigError: {
      BIZUR_ASSERT(resp.redirect.has_value(), "redirect without descriptor");
      retarget(*resp.redirect);
      // The old instance rejected without executing; safe to retry at the
      // successor.
      cancel_timers();
      attempt();
      return true;
    }
    default:
      presumed_leader_ = attempt_target_;
      fail_streak_ = 0;
      timed_out_.clear();
      finish(SubmitResult{SubmitStatus::Ok, resp});
      return true;
  }
}

}  // namespace bizur
