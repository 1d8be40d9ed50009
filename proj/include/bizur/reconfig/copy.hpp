// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "bizur/client/router.hpp"
#include "bizur/reconfig/descriptor.hpp"

namespace bizur {

class NodeInstance;

// Bucket transfer from the old instance during reconfiguration. The new
// instance's leader acts as an internal client of the old one: its fetches
// carry the internal flag so a draining instance still serves them, and it
// triggers elections on the old instance when that one lost its leader.
class CopyEngine {
 public:
  CopyEngine(NodeInstance& node, InstanceDescriptor source);

  // Pulls `index` from the old instance and replicates it here with
  // needs_copy cleared. Bucket critical section held by the caller; the
  // bucket must already be recovered. done(false) on leadership loss.
  void copy_bucket(uint32_t index, std::function<void(bool)> done);

  bool on_envelope(const Envelope& env);

  const InstanceDescriptor& source() const { return router_.target(); }

 private:
  struct Job {
    uint32_t index = 0;
    std::function<void(bool)> done;
  };
  void pump();
  void finish_fetch(const Job& job, ElectId elect, SubmitResult r);

  NodeInstance& node_;
  RequestRouter router_;
  std::deque<Job> queue_;
  bool pumping_ = false;
};

}  // namespace bizur
