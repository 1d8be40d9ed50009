// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <string>
#include <vector>

#include "bizur/checker/history.hpp"

namespace bizur::checker {

struct CheckParams {
  // Explored states per key history; exceeding this is an infrastructure
  // error, never a pass.
  uint64_t state_budget = 10'000'000;
};

struct Verdict {
  enum class Kind { Linearizable, Violation, SearchBudgetExceeded };
  Kind kind = Kind::Linearizable;
  std::string failing_key;
  std::string detail;
  // Linearizable: a witness order (op ids, grouped per key).
  std::vector<uint64_t> witness;
  // Violation: the failing key's full event log plus the minimal failing
  // prefix length in responses.
  std::string log;

  bool ok() const { return kind == Kind::Linearizable; }
};

const char* verdict_name(Verdict::Kind k);

// Searches for a strict-serializable explanation of the history. All
// operations are single-key, so the history is strictly serializable iff
// every per-key subhistory is linearizable against a register-with-CAS in
// real-time order; each key runs a Wing–Gong style backtracking search.
// Operations that never got a definite response may be linearized anywhere
// after their invocation or dropped entirely.
Verdict check(const History& history, CheckParams params = {});

}  // namespace bizur::checker
