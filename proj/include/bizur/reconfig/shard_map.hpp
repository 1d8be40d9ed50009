// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <string_view>
#include <vector>

#include "bizur/reconfig/descriptor.hpp"

namespace bizur {

// Static shard routing: a fixed number of shards (256 by default), each an
// independent Bizur instance with its own leader. Key-to-shard placement
// never changes; scaling moves whole shards between servers through
// reconfiguration.
class ShardMap {
 public:
  static constexpr uint32_t kDefaultShards = 256;

  explicit ShardMap(uint32_t num_shards = kDefaultShards);

  uint32_t num_shards() const { return num_shards_; }
  uint32_t shard_of(std::string_view key) const;

  const InstanceDescriptor& descriptor(uint32_t shard) const;
  std::vector<InstanceDescriptor> descriptors() const { return shards_; }

  // Adopts the descriptor when its epoch is not older than the current one.
  void publish(const InstanceDescriptor& desc);

  // (shard, descriptor) for a key.
  std::pair<uint32_t, const InstanceDescriptor*> route(
      std::string_view key) const;

 private:
  uint32_t num_shards_;
  std::vector<InstanceDescriptor> shards_;
};

}  // namespace bizur
