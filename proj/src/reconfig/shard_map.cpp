// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/reconfig/shard_map.hpp"

#include "bizur/assert.hpp"
#include "bizur/hash.hpp"

namespace bizur {

ShardMap::ShardMap(uint32_t num_shards) : num_shards_(num_shards) {
  BIZUR_ASSERT(num_shards_ >= 1, "need at least one shard");
  shards_.resize(num_shards_);
  for (uint32_t s = 0; s < num_shards_; ++s) shards_[s].shard = s;
}

uint32_t ShardMap::shard_of(std::string_view key) const {
  return hash_key(key, num_shards_);
}

const InstanceDescriptor& ShardMap::descriptor(uint32_t shard) const {
  BIZUR_ASSERT(shard < num_shards_, "shard out of range");
  return shards_[shard];
}

void ShardMap::publish(const InstanceDescriptor& desc) {
  BIZUR_ASSERT(desc.shard < num_shards_, "shard out of range");
  if (desc.instance_id < shards_[desc.shard].instance_id) return;
  shards_[desc.shard] = desc;
}

std::pair<uint32_t, const InstanceDescriptor*> ShardMap::route(
    std::string_view key) const {
  uint32_t shard = shard_of(key);
  return {shard, &shards_[shard]};
}

}  // namespace bizur
