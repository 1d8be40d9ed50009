// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include <cstring>

#include "bizur/assert.hpp"
#include "bizur/codec.hpp"
#include "bizur/hash.hpp"
#include "bizur/types.hpp"

namespace bizur {

Ordering compare_versions(const BucketVersion& a, const BucketVersion& b) {
  if (a.elect_id != b.elect_id)
    return a.elect_id < b.elect_id ? Ordering::Less : Ordering::Greater;
  if (a.counter != b.counter)
    return a.counter < b.counter ? Ordering::Less : Ordering::Greater;
  return Ordering::Equal;
}

namespace {
constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

uint64_t fnv1a64_basis(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}
}  // namespace

uint64_t fnv1a64(std::string_view bytes) {
  return fnv1a64_basis(bytes, kFnvOffsetBasis);
}

uint32_t hash_key(std::string_view key, uint32_t num_buckets) {
  BIZUR_ASSERT(num_buckets >= 1, "num_buckets must be positive");
  return static_cast<uint32_t>(fnv1a64(key) % num_buckets);
}

namespace {
// splitmix64 finisher. FNV-1a's low bit is a parity function of the input
// bits, and changing the offset basis only flips it; without avalanche the
// shard level (fnv % shards) would constrain the low bucket bits and leave
// half of every shard's buckets unreachable.
uint64_t avalanche(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

uint32_t hash_key(std::string_view key, uint32_t num_buckets, uint64_t seed) {
  BIZUR_ASSERT(num_buckets >= 1, "num_buckets must be positive");
  return static_cast<uint32_t>(avalanche(fnv1a64(key) ^ seed) % num_buckets);
}

Bucket encode_set(Bucket bucket, std::string_view key, std::string_view value) {
  BIZUR_ASSERT(key.size() <= kMaxKeyBytes, "key exceeds size cap");
  BIZUR_ASSERT(value.size() <= kMaxValueBytes, "value exceeds size cap");
  bucket.entries.insert_or_assign(std::string(key), std::string(value));
  return bucket;
}

Bucket encode_delete(Bucket bucket, std::string_view key) {
  bucket.entries.erase(std::string(key));
  return bucket;
}

std::optional<std::string> decode(const Bucket& bucket, std::string_view key) {
  auto it = bucket.entries.find(std::string(key));
  if (it == bucket.entries.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> decode_keys(const Bucket& bucket) {
  std::set<std::string> keys;
  for (const auto& [k, v] : bucket.entries) keys.insert(k);
  return keys;
}

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view in;
  size_t pos = 0;

  bool take(void* dst, size_t n) {
    if (in.size() - pos < n) return false;
    std::memcpy(dst, in.data() + pos, n);
    pos += n;
    return true;
  }
  bool u8(uint8_t& v) { return take(&v, 1); }
  bool u16(uint16_t& v) {
    uint8_t b[2];
    if (!take(b, 2)) return false;
    v = static_cast<uint16_t>(b[0] | (b[1] << 8));
    return true;
  }
  bool u32(uint32_t& v) {
    uint8_t b[4];
    if (!take(b, 4)) return false;
    v = b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
    return true;
  }
  bool u64(uint64_t& v) {
    uint8_t b[8];
    if (!take(b, 8)) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return true;
  }
  bool str(std::string& s, size_t n) {
    if (in.size() - pos < n) return false;
    s.assign(in.data() + pos, n);
    pos += n;
    return true;
  }
};

constexpr char kMagic[4] = {'B', 'Z', 'B', '1'};

}  // namespace

std::string serialize_bucket(const Bucket& bucket) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, bucket.index);
  put_u64(out, bucket.ver.elect_id);
  put_u64(out, bucket.ver.counter);
  out.push_back(bucket.needs_copy ? 1 : 0);
  put_u32(out, static_cast<uint32_t>(bucket.entries.size()));
  // std::map iterates in lexicographic key order, which pins the layout.
  for (const auto& [key, value] : bucket.entries) {
    put_u16(out, static_cast<uint16_t>(key.size()));
    out.append(key);
    put_u32(out, static_cast<uint32_t>(value.size()));
    out.append(value);
  }
  return out;
}

std::optional<Bucket> deserialize_bucket(std::string_view bytes,
                                         std::string* error) {
  auto fail = [&](const char* why) -> std::optional<Bucket> {
    if (error) *error = why;
    return std::nullopt;
  };
  Reader r{bytes};
  char magic[4];
  if (!r.take(magic, 4)) return fail("truncated magic");
  if (std::memcmp(magic, kMagic, 4) != 0) return fail("bad magic");
  Bucket b;
  uint8_t needs_copy = 0;
  uint32_t count = 0;
  if (!r.u32(b.index) || !r.u64(b.ver.elect_id) || !r.u64(b.ver.counter) ||
      !r.u8(needs_copy) || !r.u32(count))
    return fail("truncated header");
  if (needs_copy > 1) return fail("bad needs_copy flag");
  b.needs_copy = needs_copy != 0;
  std::string prev_key;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t klen = 0;
    uint32_t vlen = 0;
    std::string key, value;
    if (!r.u16(klen) || !r.str(key, klen)) return fail("truncated key");
    if (!r.u32(vlen) || !r.str(value, vlen)) return fail("truncated value");
    if (vlen > kMaxValueBytes) return fail("value exceeds size cap");
    if (i > 0 && key <= prev_key) return fail("entries out of order");
    prev_key = key;
    b.entries.emplace(std::move(key), std::move(value));
  }
  if (r.pos != bytes.size()) return fail("trailing bytes");
  return b;
}

}  // namespace bizur
