// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <string>

namespace bizur {

// Simulated time in microseconds.
using SimTime = uint64_t;

constexpr SimTime sim_us(uint64_t v) { return v; }
constexpr SimTime sim_ms(uint64_t v) { return v * 1000; }
constexpr SimTime sim_sec(uint64_t v) { return v * 1000 * 1000; }

// Endpoint identity. Servers, clients and controllers share one address
// space: a ServerId names a deliverable endpoint in the simulation, and the
// member identity of a node within one Bizur instance.
struct ServerId {
  uint32_t value = 0;
  auto operator<=>(const ServerId&) const = default;
};

// Monotonic election counter. Starts at 0; never decreases at any server.
using ElectId = uint64_t;

// Reconfiguration epoch. Higher epochs supersede lower ones.
using InstanceId = uint64_t;

// Bucket versions order lexicographically: elect_id first, counter second.
// The counter restarts at 0 whenever a new leader recovers the bucket.
struct BucketVersion {
  ElectId elect_id = 0;
  uint64_t counter = 0;
  auto operator<=>(const BucketVersion&) const = default;
};

enum class Ordering { Less, Equal, Greater };

Ordering compare_versions(const BucketVersion& a, const BucketVersion& b);

inline constexpr size_t kMaxKeyBytes = 4 * 1024;
inline constexpr size_t kMaxValueBytes = 64 * 1024;

// The replicated unit: a hashed slice of the key space plus its version.
// Buckets are plain values; every protocol step works on copies.
struct Bucket {
  uint32_t index = 0;
  BucketVersion ver;
  std::map<std::string, std::string> entries;
  // Set while a reconfiguring instance still has to pull this bucket's
  // content from the instance it replaces.
  bool needs_copy = false;

  bool operator==(const Bucket&) const = default;
};

}  // namespace bizur

template <>
struct std::hash<bizur::ServerId> {
  size_t operator()(const bizur::ServerId& s) const noexcept {
    return std::hash<uint32_t>{}(s.value);
  }
};
