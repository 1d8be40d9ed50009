// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "bizur/types.hpp"

namespace bizur {

// Global safety observer: for every (instance, elect_id) at most one server
// may ever mark itself leader. Every simulation embeds one; any breach
// fails the run regardless of what the scenario was measuring.
class LeaderObserver {
 public:
  void on_leader_marked(InstanceId instance, ElectId elect_id, ServerId server);

  bool violated() const { return !violations_.empty(); }
  const std::vector<std::string>& violations() const { return violations_; }
  uint64_t marks() const { return marks_; }

 private:
  std::map<std::pair<InstanceId, ElectId>, ServerId> leaders_;
  std::vector<std::string> violations_;
  uint64_t marks_ = 0;
};

}  // namespace bizur
