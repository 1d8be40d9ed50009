// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bizur/types.hpp"

namespace bizur::checker {

enum class HOp { Get, Set, Delete, CasSet, CasDelete };

const char* hop_name(HOp op);

// Client-visible result of one operation.
struct Outcome {
  enum class Kind {
    Value,          // get returned a value
    Absent,         // get found nothing
    Ok,             // mutation acknowledged
    CasMismatch,    // conditional mutation rejected; `value` is the actual
    Indeterminate,  // mutation may or may not have been applied
    FailedClean,    // never applied (retries exhausted on clean failures)
  };
  Kind kind = Kind::Ok;
  std::optional<std::string> value;  // Value payload / CasMismatch actual

  static Outcome value_of(std::string v) {
    return Outcome{Kind::Value, std::move(v)};
  }
  static Outcome absent() { return Outcome{Kind::Absent, std::nullopt}; }
  static Outcome ok() { return Outcome{Kind::Ok, std::nullopt}; }
  static Outcome cas_mismatch(std::optional<std::string> actual) {
    return Outcome{Kind::CasMismatch, std::move(actual)};
  }
  static Outcome indeterminate() {
    return Outcome{Kind::Indeterminate, std::nullopt};
  }
  static Outcome failed_clean() {
    return Outcome{Kind::FailedClean, std::nullopt};
  }
};

// One invocation with its (possibly missing) response. Sequence numbers
// order invocation and response events globally; an op without a response
// was still pending when the run ended.
struct OpRecord {
  uint64_t id = 0;
  uint32_t client = 0;
  HOp op = HOp::Get;
  std::string key;
  std::string value;                  // set / cas_set payload
  std::optional<std::string> expected;  // cas ops; nullopt = expect absent
  SimTime invoke_time = 0;
  uint64_t invoke_seq = 0;
  std::optional<SimTime> respond_time;
  uint64_t respond_seq = UINT64_MAX;
  std::optional<Outcome> outcome;

  bool responded() const { return outcome.has_value(); }
};

// Timestamped invocation/response log. A client records the invoke when it
// submits and the response when the final result arrives; retries stay
// inside one record.
class History {
 public:
  uint64_t invoke(SimTime t, uint32_t client, HOp op, std::string key,
                  std::string value, std::optional<std::string> expected);
  void respond(uint64_t id, SimTime t, Outcome outcome);

  const std::vector<OpRecord>& ops() const { return ops_; }
  size_t responded_count() const;
  size_t acked_count() const;  // definite, successful outcomes

  // One event per line: time, client, invoke|respond, op, key,
  // payload / result. Stable field order, diffable.
  std::string to_text() const;

  // Replays acknowledged mutations in respond order; keys whose state could
  // be touched by an indeterminate or pending mutation are excluded.
  // Returns key -> value for the remaining keys.
  std::map<std::string, std::string> oracle_map(
      std::vector<std::string>* tainted_keys = nullptr) const;

 private:
  std::vector<OpRecord> ops_;
  std::map<uint64_t, size_t> by_id_;
  uint64_t event_seq_ = 0;
};

}  // namespace bizur::checker
