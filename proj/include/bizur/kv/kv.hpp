// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "bizur/envelope.hpp"
#include "bizur/node/node.hpp"

namespace bizur {

// Leader-side key-value API on top of the node's bucket rounds.
//
// Steady state (bucket recovered) costs one cluster round-trip per
// operation: mutations skip the read entirely and let the write round prove
// leadership; gets run a single validation round and answer from the local
// copy. The first access after an election folds the recovery write-back
// into the operation itself, so it stays at two round-trips.
class KvFrontend {
 public:
  explicit KvFrontend(NodeInstance& node);

  void handle(const Envelope& env);

 private:
  struct IterState;

  void do_get(Envelope env);
  void do_mutation(Envelope env);
  void apply_mutation(const Envelope& env, uint32_t index, Bucket base,
                      bool base_remote, NodeInstance::BucketGuard guard);
  void validate_then_mismatch(const Envelope& env, uint32_t index,
                              std::optional<std::string> actual,
                              NodeInstance::BucketGuard guard);
  void do_iterate(Envelope env);
  void iterate_ready_step(std::shared_ptr<IterState> st);
  void iterate_ready_done(std::shared_ptr<IterState> st);
  void iterate_validate_step(std::shared_ptr<IterState> st);
  void do_fetch_bucket(Envelope env);

  uint32_t bucket_of(const std::string& key) const;
  // Re-checked whenever an operation actually starts (it may have queued
  // behind the bucket lock while a drain or a leader change arrived).
  bool reject_if_unservable(const Envelope& env);
  void finish(const Envelope& request, KvResponse resp);

  NodeInstance& node_;
  std::unordered_map<uint64_t, KvResponse> reply_cache_;
  std::deque<uint64_t> reply_cache_order_;
  std::unordered_set<uint64_t> inflight_;

  static constexpr size_t kReplyCacheCap = 4096;
};

}  // namespace bizur
