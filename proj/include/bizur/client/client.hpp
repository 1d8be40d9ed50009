// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "bizur/checker/history.hpp"
#include "bizur/checker/workload.hpp"
#include "bizur/client/router.hpp"
#include "bizur/sim/simulation.hpp"

namespace bizur {

// One logical client endpoint: routes keyed requests to the owning shard's
// instance, follows descriptor updates, and optionally drives a closed-loop
// scripted workload that records into a shared history.
class ClientActor : public sim::Actor {
 public:
  ClientActor(sim::Transport& transport, ServerId self, uint32_t index,
              std::vector<InstanceDescriptor> shards, RouterOptions opt);

  void on_envelope(Envelope env) override;

  // Keyed request routed by hash; one outstanding request per shard.
  void submit(KvRequest req, std::function<void(SubmitResult)> done);
  void submit_to_shard(uint32_t shard, KvRequest req,
                       std::function<void(SubmitResult)> done);

  void start_workload(checker::ClientScript script,
                      checker::History* history, SimTime stop_at);
  bool workload_running() const { return workload_running_; }

  ServerId self() const { return self_; }
  uint32_t index() const { return index_; }
  RequestRouter& router(uint32_t shard) { return *routers_[shard]; }
  uint64_t elections_triggered() const;

 private:
  uint32_t shard_of(const std::string& key) const;
  void issue_next();
  void record_result(uint64_t op_id, const KvRequest& req,
                     const SubmitResult& r);

  sim::Transport& transport_;
  ServerId self_;
  uint32_t index_;
  std::vector<std::unique_ptr<RequestRouter>> routers_;

  std::optional<checker::ClientScript> script_;
  checker::History* history_ = nullptr;
  SimTime stop_at_ = 0;
  bool workload_running_ = false;
  // What this client last saw per key; binds cas expectations.
  std::unordered_map<std::string, std::optional<std::string>> last_observed_;
};

}  // namespace bizur
