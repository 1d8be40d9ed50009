// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <vector>

#include "bizur/types.hpp"

namespace bizur {

// Lifecycle of one Bizur instance during membership change.
enum class InstanceMode {
  Normal,    // serving requests
  Reconfig,  // new instance, still copying buckets from its predecessor
  Draining,  // old instance, rejecting client requests with a redirect
  Retired,   // removed
};

const char* instance_mode_name(InstanceMode mode);

// What a client (or the successor instance) needs to know to address one
// Bizur instance: its epoch, shard and member endpoints. Higher epochs are
// authoritative.
struct InstanceDescriptor {
  InstanceId instance_id = 0;
  uint32_t shard = 0;
  std::vector<ServerId> members;
  InstanceMode mode = InstanceMode::Normal;

  bool operator==(const InstanceDescriptor&) const = default;
};

}  // namespace bizur
