// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/node/store.hpp"

#include "bizur/assert.hpp"
#include "bizur/codec.hpp"

namespace bizur {

void MemoryStore::save_bucket(const Bucket& bucket) {
  buckets_[bucket.index] = serialize_bucket(bucket);
}

std::map<uint32_t, Bucket> MemoryStore::load_buckets() const {
  std::map<uint32_t, Bucket> out;
  for (const auto& [index, bytes] : buckets_) {
    auto bucket = deserialize_bucket(bytes);
    BIZUR_ASSERT(bucket.has_value(), "corrupt bucket in store");
    out.emplace(index, std::move(*bucket));
  }
  return out;
}

}  // namespace bizur
