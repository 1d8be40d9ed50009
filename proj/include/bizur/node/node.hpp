// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "bizur/envelope.hpp"
#include "bizur/node/observer.hpp"
#include "bizur/node/store.hpp"
#include "bizur/reconfig/descriptor.hpp"
#include "bizur/sim/simulation.hpp"
#include "bizur/sim/transport.hpp"
#include "bizur/types.hpp"

namespace bizur {

class KvFrontend;
class CopyEngine;

// Deliberate protocol defects for checker self-tests.
enum class NodeFault {
  None,
  // Recovery selects the max-version bucket but skips the write-back, so a
  // recovered value is never fixed at a majority.
  SkipRecoveryWriteback,
};

struct NodeConfig {
  InstanceId instance_id = 0;
  uint32_t shard = 0;
  ServerId self;
  std::vector<ServerId> members;  // includes self
  uint32_t num_buckets = 64;

  SimTime quorum_timeout = sim_ms(50);
  SimTime quorum_retransmit = sim_ms(15);
  // Election trigger damping. Many clients may ask for elections at once;
  // unchecked, concurrent candidacies at different servers invalidate each
  // other forever. A trigger starts the election after a random delay in
  // [0, stagger_max), skipped when another candidacy reached this server
  // meanwhile, and deferred while a vote is fresher than the cooldown.
  SimTime election_stagger_max = sim_ms(4);
  SimTime election_cooldown = sim_ms(12);
  // Background recovery / copy sweep cadence; 0 disables the sweep.
  SimTime sweep_interval = sim_ms(5);
  // IterateKeys validation batch; 0 means all buckets in one batch.
  uint32_t iterate_batch = 0;

  // Crash-recover mode: votes and buckets are persisted before acks.
  bool persist = false;

  // Reconfiguration: created as the new instance, pulling buckets from
  // copy_source until none carries needs_copy.
  bool start_in_reconfig = false;
  std::optional<InstanceDescriptor> copy_source;
  std::optional<ServerId> controller;  // receives CopyComplete
  SimTime copy_request_timeout = sim_ms(100);
  SimTime copy_retransmit = sim_ms(20);
  SimTime copy_election_period = sim_ms(500);

  NodeFault fault = NodeFault::None;
};

struct NodeMetrics {
  uint64_t elections_started = 0;
  uint64_t elections_won = 0;
  uint64_t write_rounds = 0;      // ReplicaWrite broadcasts
  uint64_t read_data_rounds = 0;  // ReplicaRead broadcasts carrying data back
  uint64_t validate_rounds = 0;   // validation-only ReplicaRead broadcasts
  uint64_t recoveries = 0;        // remote bucket fetches completed
  uint64_t copies = 0;            // reconfiguration bucket copies completed
  uint64_t client_ops = 0;        // client operations this node started
  uint64_t ops_executed_draining = 0;  // must stay zero
  uint64_t drain_redirects = 0;

  uint64_t rounds_total() const {
    return write_rounds + read_data_rounds + validate_rounds;
  }
};

// Quorum bookkeeping for one broadcast round. Responses are idempotent per
// server; the continuation fires exactly once, at majority ack or as soon
// as a majority becomes impossible.
struct QuorumTally {
  uint64_t msg_id = 0;
  ElectId round_elect = 0;
  Payload request;
  std::set<ServerId> acked;
  std::set<ServerId> nacked;
  std::vector<std::shared_ptr<const Bucket>> buckets;  // AckRead payloads
  sim::TimerHandle timeout_timer;
  sim::TimerHandle retransmit_timer;
  std::function<void(bool, std::vector<std::shared_ptr<const Bucket>>&)> done;
};

// One Bizur server within one instance: leader election, per-bucket
// replicated-register reads/writes, lazy recovery and the background sweep.
// Single-threaded; driven purely by delivered envelopes and timers.
class NodeInstance : public sim::Actor {
 public:
  NodeInstance(sim::Transport& transport, NodeConfig cfg, NodeStore* store,
               LeaderObserver* observer);
  ~NodeInstance() override;

  NodeInstance(const NodeInstance&) = delete;
  NodeInstance& operator=(const NodeInstance&) = delete;

  void on_envelope(Envelope env) override;

  // Starts a new election (Remark 1: the candidate's own vote is a local
  // call, never a packet).
  void start_election();

  // ---- leader-side bucket operations -------------------------------------
  // All of these expect the bucket's critical section to be held by the
  // caller and report failure when leadership is lost mid-round.

  // Stamps (elect_id, counter+1) and broadcasts. done(false) after a lost
  // majority, which also relinquishes leadership.
  void replicate_write(Bucket bucket, std::function<void(bool)> done);

  enum class Recovery { AlreadyRecovered, Recovered, Failed };
  void ensure_recovery(uint32_t index, std::function<void(Recovery)> done);

  // Read-modify-write support: yields the authoritative base content
  // without writing it back; the caller's replicate_write doubles as the
  // recovery write-back. remote=true when a read majority was consulted.
  void fetch_for_update(
      uint32_t index,
      std::function<void(std::optional<Bucket>, bool remote)> done);

  // One validation-only round ("is the leader still the leader").
  void validate_leadership(uint32_t index, std::function<void(bool)> done);

  struct Ready {
    bool ok = false;
    // True when recovery or a reconfiguration copy ran just now, which
    // already proved the leader holds a majority.
    bool performed = false;
  };
  // Recovery plus, on a reconfiguring instance, the bucket copy.
  void ensure_ready(uint32_t index, std::function<void(Ready)> done);

  // The full read path: recovery, then leadership validation unless the
  // recovery itself just ran. done(nullptr) on failure.
  void read_bucket(uint32_t index, std::function<void(const Bucket*)> done);

  // ---- per-bucket critical sections ---------------------------------------
  // Operations on one bucket are serialized; the guard releases the section
  // when the last copy of it is destroyed.
  using BucketGuard = std::shared_ptr<void>;
  void lock_bucket(uint32_t index, std::function<void(BucketGuard)> fn);

  // ---- accessors -----------------------------------------------------------
  const NodeConfig& config() const { return cfg_; }
  ServerId self() const { return cfg_.self; }
  bool is_leader() const { return is_leader_; }
  ElectId elect_id() const { return elect_id_; }
  ElectId voted_elect_id() const { return voted_elect_id_; }
  std::optional<ServerId> leader() const { return leader_; }
  std::optional<ServerId> leader_hint() const;
  const Bucket& local_bucket(uint32_t index) const;
  uint32_t num_buckets() const { return cfg_.num_buckets; }
  bool bucket_recovered(uint32_t index) const;
  bool bucket_ready(uint32_t index) const;  // recovered and copied
  bool draining() const { return draining_; }
  bool reconfiguring() const { return copy_ != nullptr; }
  const std::optional<InstanceDescriptor>& drain_successor() const {
    return successor_;
  }
  const NodeMetrics& metrics() const { return metrics_; }
  NodeMetrics& metrics() { return metrics_; }
  sim::Transport& transport() { return transport_; }
  size_t majority() const { return cfg_.members.size() / 2 + 1; }

  void send_response(const Envelope& request, KvResponse resp);

 private:
  friend class KvFrontend;
  friend class CopyEngine;

  // Replica-side handlers; each returns the reply payload. Also used for
  // local self-delivery at round start.
  Payload apply_please_vote(ElectId elect_id, ServerId candidate);
  Payload apply_replica_write(const std::shared_ptr<const Bucket>& bucket,
                              ServerId source);
  Payload apply_replica_read(uint32_t index, ElectId elect_id,
                             bool validate_only, ServerId source);

  void start_round(
      Payload request, ElectId round_elect, Payload self_reply,
      std::function<void(bool, std::vector<std::shared_ptr<const Bucket>>&)>
          done);
  void on_quorum_response(const Envelope& env);
  void check_resolution(uint64_t msg_id);
  void resolve(uint64_t msg_id, bool success);
  void arm_round_timers(uint64_t msg_id);
  void arm_retransmit(uint64_t msg_id);

  void relinquish();
  void on_election_won(ElectId elect);
  void on_trigger_election();
  void election_attempt(ElectId voted_snapshot);

  // Background sweep: one bucket per tick, recovery plus copy.
  void start_sweep();
  void sweep_tick();
  void report_copy_complete();

  void persist_vote();
  void persist_bucket(const Bucket& b);
  void reply(const Envelope& env, Payload payload);
  void unlock_bucket(uint32_t index);
  BucketGuard make_guard(uint32_t index);

  sim::Transport& transport_;
  NodeConfig cfg_;
  NodeStore* store_ = nullptr;
  LeaderObserver* observer_ = nullptr;

  ElectId elect_id_ = 0;
  ElectId voted_elect_id_ = 0;
  std::optional<ServerId> leader_;
  bool is_leader_ = false;
  std::vector<Bucket> local_buckets_;
  std::unordered_map<uint64_t, QuorumTally> pending_;

  std::vector<bool> bucket_busy_;
  std::vector<std::deque<std::function<void(BucketGuard)>>> bucket_waiting_;

  bool draining_ = false;
  std::optional<InstanceDescriptor> successor_;

  bool election_pending_ = false;
  SimTime last_vote_time_ = 0;

  uint32_t sweep_cursor_ = 0;
  sim::TimerHandle sweep_timer_;
  bool copy_complete_acked_ = false;
  sim::TimerHandle copy_report_timer_;

  NodeMetrics metrics_;
  std::unique_ptr<KvFrontend> kv_;
  std::unique_ptr<CopyEngine> copy_;
  // Liveness sentinel for guard deleters that may be destroyed after the
  // node (inside still-queued simulator events).
  std::shared_ptr<NodeInstance*> self_ref_ =
      std::make_shared<NodeInstance*>(this);
};

}  // namespace bizur
