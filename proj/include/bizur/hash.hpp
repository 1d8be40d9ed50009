// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <string_view>

namespace bizur {

// 64-bit FNV-1a over a byte string.
uint64_t fnv1a64(std::string_view bytes);

// Key-to-bucket mapping: FNV-1a reduced modulo the bucket count.
// num_buckets must be >= 1.
uint32_t hash_key(std::string_view key, uint32_t num_buckets);

// Seeded variant establishing an independent hash domain: the FNV value is
// xored with the seed and passed through an avalanche finisher. Used for
// the bucket-within-shard level; reducing the raw FNV value at both levels
// would correlate them (fnv % 256 fully determines fnv % 64, and even a
// different basis leaves the low bit a parity of the input).
uint32_t hash_key(std::string_view key, uint32_t num_buckets, uint64_t seed);

// Domain seed for the within-shard bucket level.
inline constexpr uint64_t kBucketHashSeed = 0x9e3779b97f4a7c15ull;

}  // namespace bizur
