// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <string>
#include <vector>

#include "bizur/checker/checker.hpp"
#include "bizur/harness/scenario.hpp"

namespace bizur::harness {

// One checker run: a short fault-heavy scenario (drops plus a leader kill)
// driven by concurrent clients, with the history fed to the
// serializability search.
struct CheckerRunParams {
  uint32_t clients = 8;
  uint32_t servers = 3;
  uint32_t keys = 0;  // 0: derive 1..64 from the seed
  double drop_rate = 0.05;
  uint64_t duration_ms = 600;
  NodeFault fault = NodeFault::None;
  // Kill schedule: fractions of the duration at which the current leader is
  // crashed; values > 0 with recovery make room for several leader changes.
  std::vector<double> kill_at = {0.4};
  double kill_recover_fraction = 0.0;  // 0 = crash-stop
  // Shortly before each kill, partition the leader plus one follower away
  // from the rest so in-flight writes strand on that pair; healed just
  // after the kill. This is what makes a skipped recovery write-back
  // observable.
  bool half_write_kills = false;
  checker::OpMix mix{0.30, 0.45, 0.10, 0.15};
};

struct CheckerRunResult {
  uint64_t seed = 0;
  checker::Verdict verdict;
  checker::History history;
  std::vector<std::string> observer_violations;
};

ScenarioConfig checker_scenario(uint64_t seed, const CheckerRunParams& params);
CheckerRunResult run_checker_once(uint64_t seed,
                                  const CheckerRunParams& params);

}  // namespace bizur::harness
