// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/node/node.hpp"

#include <algorithm>

#include "bizur/assert.hpp"
#include "bizur/kv/kv.hpp"
#include "bizur/reconfig/copy.hpp"

namespace bizur {

NodeInstance::NodeInstance(sim::Transport& transport, NodeConfig cfg,
                           NodeStore* store, LeaderObserver* observer)
    : transport_(transport),
      cfg_(std::move(cfg)),
      store_(store),
      observer_(observer) {
  BIZUR_ASSERT(!cfg_.members.empty(), "instance needs members");
  BIZUR_ASSERT(std::count(cfg_.members.begin(), cfg_.members.end(),
                          cfg_.self) == 1,
               "self must appear once in members");
  BIZUR_ASSERT(cfg_.num_buckets >= 1, "need at least one bucket");

  local_buckets_.resize(cfg_.num_buckets);
  for (uint32_t i = 0; i < cfg_.num_buckets; ++i) {
    local_buckets_[i].index = i;
    local_buckets_[i].needs_copy = cfg_.start_in_reconfig;
  }
  bucket_busy_.assign(cfg_.num_buckets, false);
  bucket_waiting_.resize(cfg_.num_buckets);

  if (cfg_.persist && store_) {
    // Restart from durable state: the vote and buckets survive, leadership
    // and the pending table do not. elect_id resumes at the vote so it can
    // never run backwards.
    voted_elect_id_ = store_->load_vote();
    elect_id_ = voted_elect_id_;
    for (auto& [index, bucket] : store_->load_buckets()) {
      if (index < cfg_.num_buckets) local_buckets_[index] = bucket;
    }
  }

  kv_ = std::make_unique<KvFrontend>(*this);
  if (cfg_.start_in_reconfig) {
    BIZUR_ASSERT(cfg_.copy_source.has_value(),
                 "reconfiguring instance needs a copy source");
    copy_ = std::make_unique<CopyEngine>(*this, *cfg_.copy_source);
  }
}

NodeInstance::~NodeInstance() = default;

const Bucket& NodeInstance::local_bucket(uint32_t index) const {
  BIZUR_ASSERT(index < local_buckets_.size(), "bucket index out of range");
  return local_buckets_[index];
}

bool NodeInstance::bucket_recovered(uint32_t index) const {
  return local_bucket(index).ver.elect_id == elect_id_;
}

bool NodeInstance::bucket_ready(uint32_t index) const {
  const Bucket& b = local_bucket(index);
  return b.ver.elect_id == elect_id_ && !(copy_ && b.needs_copy);
}

std::optional<ServerId> NodeInstance::leader_hint() const {
  if (is_leader_) return cfg_.self;
  if (leader_ && *leader_ != cfg_.self) return leader_;
  return std::nullopt;
}

void NodeInstance::reply(const Envelope& env, Payload payload) {
  transport_.send(Envelope{env.msg_id, cfg_.self, env.from, std::move(payload)});
}

void NodeInstance::send_response(const Envelope& request, KvResponse resp) {
  reply(request, ClientResponse{std::move(resp)});
}

void NodeInstance::persist_vote() {
  if (cfg_.persist && store_) store_->save_vote(voted_elect_id_);
}

void NodeInstance::persist_bucket(const Bucket& b) {
  if (cfg_.persist && store_) store_->save_bucket(b);
}

// ---- replica-side handlers --------------------------------------------------

Payload NodeInstance::apply_please_vote(ElectId elect_id, ServerId candidate) {
  if (elect_id > voted_elect_id_) {
    voted_elect_id_ = elect_id;
    last_vote_time_ = transport_.now();
    leader_ = candidate;
    persist_vote();
    return AckVote{};
  }
  if (elect_id == voted_elect_id_ && leader_ && *leader_ == candidate) {
    return AckVote{};  // re-vote for the same candidate
  }
  return NackVote{};
}

Payload NodeInstance::apply_replica_write(
    const std::shared_ptr<const Bucket>& bucket, ServerId source) {
  if (bucket->ver.elect_id < voted_elect_id_) return NackWrite{};
  // The write carries a vote update: the writer was elected by a majority,
  // so adopting it cannot add a second leader for its election.
  if (bucket->ver.elect_id != voted_elect_id_) {
    voted_elect_id_ = bucket->ver.elect_id;
    last_vote_time_ = transport_.now();
  }
  leader_ = source;
  BIZUR_ASSERT(bucket->index < local_buckets_.size(), "write out of range");
  // Stored versions only move forward. A leader pipelines rounds on a
  // bucket, so a retransmitted or delayed copy of round c can land after
  // round c+1 was stored; accepting it would roll the replica back, and a
  // later recovery could then resurrect the superseded value on a majority.
  // Re-deliveries at or below the stored version are acknowledged (the
  // newer local content subsumes them) but not stored.
  if (bucket->ver <= local_buckets_[bucket->index].ver) return AckWrite{};
  local_buckets_[bucket->index] = *bucket;
  if (cfg_.persist && store_) {
    store_->save_vote(voted_elect_id_);
    store_->save_bucket(*bucket);
  }
  return AckWrite{};
}

Payload NodeInstance::apply_replica_read(uint32_t index, ElectId elect_id,
                                         bool validate_only, ServerId source) {
  if (elect_id < voted_elect_id_) return NackRead{};
  if (elect_id != voted_elect_id_) {
    voted_elect_id_ = elect_id;
    last_vote_time_ = transport_.now();
    persist_vote();
  }
  leader_ = source;
  if (validate_only) return AckRead{nullptr};
  BIZUR_ASSERT(index < local_buckets_.size(), "read out of range");
  return AckRead{std::make_shared<const Bucket>(local_buckets_[index])};
}

// ---- quorum rounds -----------------------------------------------------------

void NodeInstance::start_round(
    Payload request, ElectId round_elect, Payload self_reply,
    std::function<void(bool, std::vector<std::shared_ptr<const Bucket>>&)>
        done) {
  uint64_t msg_id = transport_.next_msg_id();
  QuorumTally tally;
  tally.msg_id = msg_id;
  tally.round_elect = round_elect;
  tally.request = request;
  tally.done = std::move(done);

  // Tally the local reply first (self-delivery is a call, not a packet).
  if (std::holds_alternative<AckVote>(self_reply) ||
      std::holds_alternative<AckWrite>(self_reply)) {
    tally.acked.insert(cfg_.self);
  } else if (auto* ar = std::get_if<AckRead>(&self_reply)) {
    tally.acked.insert(cfg_.self);
    if (ar->bucket) tally.buckets.push_back(ar->bucket);
  } else {
    tally.nacked.insert(cfg_.self);
  }

  pending_.emplace(msg_id, std::move(tally));
  for (ServerId peer : cfg_.members) {
    if (peer == cfg_.self) continue;
    transport_.send(Envelope{msg_id, cfg_.self, peer, request});
  }
  arm_round_timers(msg_id);
  check_resolution(msg_id);
}

void NodeInstance::arm_round_timers(uint64_t msg_id) {
  auto it = pending_.find(msg_id);
  if (it == pending_.end()) return;
  it->second.timeout_timer =
      transport_.set_timer(cfg_.self, cfg_.quorum_timeout, [this, msg_id]() {
        auto t = pending_.find(msg_id);
        if (t == pending_.end()) return;
        // Remark 1: a missing response counts as a Nack.
        for (ServerId peer : cfg_.members) {
          if (!t->second.acked.count(peer)) t->second.nacked.insert(peer);
        }
        check_resolution(msg_id);
      });
  if (cfg_.quorum_retransmit > 0 &&
      cfg_.quorum_retransmit < cfg_.quorum_timeout) {
    arm_retransmit(msg_id);
  }
}

void NodeInstance::arm_retransmit(uint64_t msg_id) {
  auto it = pending_.find(msg_id);
  if (it == pending_.end()) return;
  it->second.retransmit_timer = transport_.set_timer(
      cfg_.self, cfg_.quorum_retransmit, [this, msg_id]() {
        auto t = pending_.find(msg_id);
        if (t == pending_.end()) return;
        for (ServerId peer : cfg_.members) {
          if (peer == cfg_.self) continue;
          if (t->second.acked.count(peer) || t->second.nacked.count(peer))
            continue;
          transport_.send(Envelope{msg_id, cfg_.self, peer, t->second.request});
        }
        arm_retransmit(msg_id);
      });
}

void NodeInstance::on_quorum_response(const Envelope& env) {
  auto it = pending_.find(env.msg_id);
  if (it == pending_.end()) return;  // late or duplicate after resolution
  QuorumTally& t = it->second;
  if (t.acked.count(env.from) || t.nacked.count(env.from)) return;

  if (std::holds_alternative<AckVote>(env.payload) ||
      std::holds_alternative<AckWrite>(env.payload)) {
    t.acked.insert(env.from);
  } else if (auto* ar = std::get_if<AckRead>(&env.payload)) {
    t.acked.insert(env.from);
    if (ar->bucket) t.buckets.push_back(ar->bucket);
  } else if (std::holds_alternative<NackVote>(env.payload) ||
             std::holds_alternative<NackWrite>(env.payload) ||
             std::holds_alternative<NackRead>(env.payload)) {
    t.nacked.insert(env.from);
  } else {
    return;  // not a quorum response
  }
  check_resolution(env.msg_id);
}

void NodeInstance::check_resolution(uint64_t msg_id) {
  auto it = pending_.find(msg_id);
  if (it == pending_.end()) return;
  const QuorumTally& t = it->second;
  size_t need = majority();
  if (t.acked.size() >= need) {
    resolve(msg_id, true);
  } else if (cfg_.members.size() - t.nacked.size() < need) {
    resolve(msg_id, false);
  }
}

void NodeInstance::resolve(uint64_t msg_id, bool success) {
  auto it = pending_.find(msg_id);
  BIZUR_ASSERT(it != pending_.end(), "resolving unknown round");
  QuorumTally tally = std::move(it->second);
  pending_.erase(it);
  transport_.cancel_timer(tally.timeout_timer);
  transport_.cancel_timer(tally.retransmit_timer);
  tally.done(success, tally.buckets);
}

// ---- election ----------------------------------------------------------------

void NodeInstance::start_election() {
  // Propose past every election this node has voted in; a proposal at or
  // below voted_elect_id is self-nacked and can never win a full cluster.
  elect_id_ = std::max(elect_id_, voted_elect_id_) + 1;
  metrics_.elections_started++;
  ElectId elect = elect_id_;
  Payload self_vote = apply_please_vote(elect, cfg_.self);
  start_round(
      PleaseVote{elect, cfg_.self}, elect, self_vote,
      [this, elect](bool success, auto&) {
        if (success) {
          // Votes can resolve after this node already voted for a newer
          // election; marking leadership then would break the invariant
          // voted_elect_id <= elect_id of the election we lead.
          if (voted_elect_id_ != elect || elect_id_ != elect) return;
          on_election_won(elect);
          return;
        }
        // A failed candidacy retries itself (staggered, cooldown-gated)
        // while the cluster looks leaderless; waiting for another client
        // trigger token would stall recovery.
        if (!is_leader_) on_trigger_election();
      });
}

void NodeInstance::on_election_won(ElectId elect) {
  is_leader_ = true;
  leader_ = cfg_.self;
  metrics_.elections_won++;
  if (observer_)
    observer_->on_leader_marked(cfg_.instance_id, elect, cfg_.self);
  sweep_cursor_ = 0;
  start_sweep();
}

void NodeInstance::on_trigger_election() {
  if (election_pending_) return;
  election_pending_ = true;
  SimTime delay = cfg_.election_stagger_max > 0
                      ? transport_.rand64() % cfg_.election_stagger_max
                      : 0;
  ElectId snapshot = voted_elect_id_;
  transport_.set_timer(cfg_.self, delay,
                       [this, snapshot]() { election_attempt(snapshot); });
}

void NodeInstance::election_attempt(ElectId voted_snapshot) {
  election_pending_ = false;
  if (is_leader_) return;
  // Another candidacy reached this server while we waited; let it play out.
  // Clients re-trigger if it went nowhere.
  if (voted_elect_id_ != voted_snapshot) return;
  // A vote fresher than the cooldown means an election is likely still in
  // flight; defer rather than start a competing one.
  SimTime now = transport_.now();
  if (last_vote_time_ > 0 && now - last_vote_time_ < cfg_.election_cooldown) {
    election_pending_ = true;
    SimTime delay =
        cfg_.election_cooldown - (now - last_vote_time_) +
        (cfg_.election_stagger_max > 0
             ? transport_.rand64() % cfg_.election_stagger_max
             : 0);
    ElectId snapshot = voted_elect_id_;
    transport_.set_timer(cfg_.self, delay,
                         [this, snapshot]() { election_attempt(snapshot); });
    return;
  }
  start_election();
}

void NodeInstance::relinquish() {
  is_leader_ = false;
  transport_.cancel_timer(sweep_timer_);
  sweep_timer_ = {};
}

// ---- leader-side bucket rounds ------------------------------------------------

void NodeInstance::replicate_write(Bucket bucket,
                                   std::function<void(bool)> done) {
  if (!is_leader_) {
    done(false);
    return;
  }
  bucket.ver.elect_id = elect_id_;
  bucket.ver.counter += 1;
  metrics_.write_rounds++;
  auto shared = std::make_shared<const Bucket>(std::move(bucket));
  ElectId elect = elect_id_;
  Payload self_reply = apply_replica_write(shared, cfg_.self);
  start_round(ReplicaWrite{shared}, elect, self_reply,
              [this, elect, done = std::move(done)](bool success, auto&) {
                if (success) {
                  done(true);
                  return;
                }
                // No majority believes in this leadership any more.
                if (is_leader_ && elect_id_ == elect) relinquish();
                done(false);
              });
}

void NodeInstance::fetch_for_update(
    uint32_t index,
    std::function<void(std::optional<Bucket>, bool remote)> done) {
  if (!is_leader_) {
    done(std::nullopt, false);
    return;
  }
  if (bucket_recovered(index)) {
    done(local_buckets_[index], false);
    return;
  }
  metrics_.read_data_rounds++;
  ElectId elect = elect_id_;
  Payload self_reply = apply_replica_read(index, elect, false, cfg_.self);
  start_round(
      ReplicaRead{index, elect, false}, elect, self_reply,
      [this, index, elect, done = std::move(done)](bool success, auto& buckets) {
        if (!success) {
          if (is_leader_ && elect_id_ == elect) relinquish();
          done(std::nullopt, false);
          return;
        }
        // A majority read taken under a superseded election must not feed a
        // write under the current one: it can miss writes acknowledged in
        // between.
        if (!is_leader_ || elect_id_ != elect) {
          done(std::nullopt, false);
          return;
        }
        const Bucket* best = nullptr;
        for (const auto& b : buckets) {
          if (!best || b->ver > best->ver) best = b.get();
        }
        BIZUR_ASSERT(best != nullptr, "read majority carried no bucket");
        for (const auto& b : buckets) {
          if (b->ver == best->ver) {
            BIZUR_ASSERT(b->entries == best->entries &&
                             b->needs_copy == best->needs_copy,
                         "diverged bucket content at equal version");
          }
        }
        Bucket recovered = *best;
        recovered.index = index;
        recovered.ver = BucketVersion{elect, 0};
        metrics_.recoveries++;
        done(std::move(recovered), true);
      });
}

void NodeInstance::ensure_recovery(uint32_t index,
                                   std::function<void(Recovery)> done) {
  if (!is_leader_) {
    done(Recovery::Failed);
    return;
  }
  // The local elect_id only advances through Write, so matching the current
  // election proves this leader already wrote the bucket back.
  if (bucket_recovered(index)) {
    done(Recovery::AlreadyRecovered);
    return;
  }
  fetch_for_update(
      index, [this, index, done = std::move(done)](std::optional<Bucket> base,
                                                   bool) {
        if (!base) {
          done(Recovery::Failed);
          return;
        }
        if (cfg_.fault == NodeFault::SkipRecoveryWriteback) {
          // Deliberately broken variant for checker self-tests: the value is
          // adopted locally but never fixed at a majority.
          local_buckets_[index] = *base;
          done(Recovery::Recovered);
          return;
        }
        ElectId elect = elect_id_;
        transport_.chaos_point(
            "recovery.writeback", cfg_.self,
            [this, elect, base = std::move(*base),
             done = std::move(done)]() mutable {
              if (!is_leader_ || elect_id_ != elect) {
                done(Recovery::Failed);
                return;
              }
              replicate_write(std::move(base), [done = std::move(done)](
                                                   bool ok) {
                done(ok ? Recovery::Recovered : Recovery::Failed);
              });
            });
      });
}

void NodeInstance::validate_leadership(uint32_t index,
                                       std::function<void(bool)> done) {
  if (!is_leader_) {
    done(false);
    return;
  }
  metrics_.validate_rounds++;
  ElectId elect = elect_id_;
  Payload self_reply = apply_replica_read(index, elect, true, cfg_.self);
  start_round(ReplicaRead{index, elect, true}, elect, self_reply,
              [this, elect, done = std::move(done)](bool success, auto&) {
                if (success) {
                  done(true);
                  return;
                }
                if (is_leader_ && elect_id_ == elect) relinquish();
                done(false);
              });
}

void NodeInstance::ensure_ready(uint32_t index,
                                std::function<void(Ready)> done) {
  ensure_recovery(index, [this, index, done = std::move(done)](Recovery rec) {
    if (rec == Recovery::Failed) {
      done(Ready{false, rec == Recovery::Recovered});
      return;
    }
    bool performed = rec == Recovery::Recovered;
    if (copy_ && local_buckets_[index].needs_copy) {
      copy_->copy_bucket(index, [done = std::move(done)](bool ok) {
        done(Ready{ok, true});
      });
      return;
    }
    done(Ready{true, performed});
  });
}

void NodeInstance::read_bucket(uint32_t index,
                               std::function<void(const Bucket*)> done) {
  ensure_ready(index, [this, index, done = std::move(done)](Ready r) {
    if (!r.ok) {
      done(nullptr);
      return;
    }
    if (r.performed) {
      // The recovery (or copy) write just proved the majority follows this
      // leader; the extra check would be redundant.
      done(&local_buckets_[index]);
      return;
    }
    validate_leadership(index, [this, index, done = std::move(done)](bool ok) {
      done(ok ? &local_buckets_[index] : nullptr);
    });
  });
}

// ---- bucket critical sections --------------------------------------------------

NodeInstance::BucketGuard NodeInstance::make_guard(uint32_t index) {
  // Releases the section when the last copy dies; a 0-delay timer keeps the
  // next waiter off this call stack. Guards can outlive the node inside
  // queued simulator events, hence the weak sentinel.
  std::weak_ptr<NodeInstance*> weak = self_ref_;
  return BucketGuard(reinterpret_cast<void*>(1), [weak, index](void*) {
    if (auto self = weak.lock()) (*self)->unlock_bucket(index);
  });
}

void NodeInstance::lock_bucket(uint32_t index,
                               std::function<void(BucketGuard)> fn) {
  BIZUR_ASSERT(index < cfg_.num_buckets, "lock out of range");
  if (bucket_busy_[index]) {
    bucket_waiting_[index].push_back(std::move(fn));
    return;
  }
  bucket_busy_[index] = true;
  fn(make_guard(index));
}

void NodeInstance::unlock_bucket(uint32_t index) {
  if (bucket_waiting_[index].empty()) {
    bucket_busy_[index] = false;
    return;
  }
  auto next = std::move(bucket_waiting_[index].front());
  bucket_waiting_[index].pop_front();
  transport_.set_timer(cfg_.self, 0, [this, index, next = std::move(next)]() {
    next(make_guard(index));
  });
}

// ---- background sweep -----------------------------------------------------------

void NodeInstance::start_sweep() {
  if (cfg_.sweep_interval == 0) return;
  transport_.cancel_timer(sweep_timer_);
  sweep_timer_ = transport_.set_timer(cfg_.self, cfg_.sweep_interval,
                                      [this]() { sweep_tick(); });
}

void NodeInstance::sweep_tick() {
  if (!is_leader_) return;
  uint32_t i = sweep_cursor_;
  while (i < cfg_.num_buckets && bucket_ready(i)) ++i;
  sweep_cursor_ = i;
  if (i >= cfg_.num_buckets) {
    if (copy_ && !copy_complete_acked_) report_copy_complete();
    return;  // everything recovered (and copied); no re-arm
  }
  // One bucket per tick; a bucket whose recovery is already in flight
  // (previous tick or a client operation) is left alone.
  if (!bucket_busy_[i]) {
    lock_bucket(i, [this, i](BucketGuard guard) {
      if (!is_leader_) return;
      ensure_ready(i, [guard](Ready) {});
    });
  }
  start_sweep();
}

void NodeInstance::report_copy_complete() {
  if (!cfg_.controller || copy_complete_acked_) return;
  transport_.send(Envelope{transport_.next_msg_id(), cfg_.self,
                           *cfg_.controller,
                           CopyComplete{cfg_.shard, cfg_.instance_id}});
  transport_.cancel_timer(copy_report_timer_);
  copy_report_timer_ = transport_.set_timer(
      cfg_.self, sim_ms(50), [this]() {
        if (is_leader_) report_copy_complete();
      });
}

// ---- envelope dispatch ------------------------------------------------------------

void NodeInstance::on_envelope(Envelope env) {
  if (auto* pv = std::get_if<PleaseVote>(&env.payload)) {
    reply(env, apply_please_vote(pv->elect_id, pv->candidate));
    return;
  }
  if (auto* rw = std::get_if<ReplicaWrite>(&env.payload)) {
    reply(env, apply_replica_write(rw->bucket, env.from));
    return;
  }
  if (auto* rr = std::get_if<ReplicaRead>(&env.payload)) {
    reply(env, apply_replica_read(rr->index, rr->elect_id, rr->validate_only,
                                  env.from));
    return;
  }
  if (std::holds_alternative<AckVote>(env.payload) ||
      std::holds_alternative<NackVote>(env.payload) ||
      std::holds_alternative<AckWrite>(env.payload) ||
      std::holds_alternative<NackWrite>(env.payload) ||
      std::holds_alternative<AckRead>(env.payload) ||
      std::holds_alternative<NackRead>(env.payload)) {
    on_quorum_response(env);
    return;
  }
  if (std::holds_alternative<TriggerElection>(env.payload)) {
    if (!is_leader_) on_trigger_election();
    return;
  }
  if (std::holds_alternative<ClientRequest>(env.payload)) {
    kv_->handle(env);
    return;
  }
  if (std::holds_alternative<ClientResponse>(env.payload)) {
    if (copy_) copy_->on_envelope(env);
    return;
  }
  if (auto* drain = std::get_if<DrainCmd>(&env.payload)) {
    draining_ = true;
    successor_ = drain->successor;
    reply(env, DrainAck{});
    return;
  }
  if (std::holds_alternative<CopyCompleteAck>(env.payload)) {
    copy_complete_acked_ = true;
    transport_.cancel_timer(copy_report_timer_);
    copy_report_timer_ = {};
    return;
  }
  // DescriptorUpdate and friends are client/controller traffic; ignore.
}

}  // namespace bizur
