// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <string>

#include "bizur/types.hpp"

namespace bizur {

// Durable per-server state for the crash-recover failure mode. A node must
// complete save_vote / save_bucket before emitting the corresponding
// protocol ack; an amnesiac voter would elect two leaders for one election.
class NodeStore {
 public:
  virtual ~NodeStore() = default;
  virtual void save_vote(ElectId voted) = 0;
  virtual void save_bucket(const Bucket& bucket) = 0;
  virtual ElectId load_vote() const = 0;
  virtual std::map<uint32_t, Bucket> load_buckets() const = 0;
};

// In-memory store holding buckets in their wire encoding; survives a
// simulated crash because the harness keeps it outside the node actor.
class MemoryStore : public NodeStore {
 public:
  void save_vote(ElectId voted) override { voted_ = voted; }
  void save_bucket(const Bucket& bucket) override;
  ElectId load_vote() const override { return voted_; }
  std::map<uint32_t, Bucket> load_buckets() const override;

 private:
  ElectId voted_ = 0;
  std::map<uint32_t, std::string> buckets_;  // index -> serialized bucket
};

}  // namespace bizur
