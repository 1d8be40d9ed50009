// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "bizur/types.hpp"

namespace bizur {

// Bucket content accessors. All pure: they take and return values.

Bucket encode_set(Bucket bucket, std::string_view key, std::string_view value);

// Removing an absent key is a no-op.
Bucket encode_delete(Bucket bucket, std::string_view key);

std::optional<std::string> decode(const Bucket& bucket, std::string_view key);

std::set<std::string> decode_keys(const Bucket& bucket);

// Binary bucket format, all integers little-endian:
//   magic "BZB1" | index u32 | elect_id u64 | counter u64 | needs_copy u8 |
//   entry_count u32 | entries, each: key_len u16, key, val_len u32, val.
// Entries are emitted in lexicographic key order, so logically equal buckets
// serialize to identical bytes.
std::string serialize_bucket(const Bucket& bucket);

// Returns nullopt on truncated or malformed input; `error`, when given,
// receives a short description.
std::optional<Bucket> deserialize_bucket(std::string_view bytes,
                                         std::string* error = nullptr);

}  // namespace bizur
