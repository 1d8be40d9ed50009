// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bizur/envelope.hpp"
#include "bizur/sim/rng.hpp"

namespace bizur::checker {

struct OpMix {
  double get = 0.25;
  double set = 0.55;
  double del = 0.10;
  double cas = 0.10;
};

enum class KeyDist { Uniform, Zipf };

struct WorkloadParams {
  uint32_t clients = 8;
  uint32_t keys = 64;
  OpMix mix;
  KeyDist dist = KeyDist::Uniform;
  double zipf_s = 1.0;
  uint32_t value_size = 16;
};

struct ScriptOp {
  KvOp op = KvOp::Get;
  std::string key;
  std::string value;  // unique per mutation, which pins it in the history
};

// One client's deterministic operation stream. The conditional ops'
// expected values are bound at submit time from what the client last
// observed; the script itself depends only on (seed, client index, params).
class ClientScript {
 public:
  ClientScript(uint64_t seed, uint32_t client_index, WorkloadParams params);
  ScriptOp next();
  uint32_t client_index() const { return client_index_; }

 private:
  std::string pick_key();

  sim::Rng rng_;
  uint32_t client_index_;
  WorkloadParams params_;
  uint64_t seq_ = 0;
  std::vector<double> zipf_cdf_;
};

std::vector<ClientScript> generate_workload(uint64_t seed,
                                            const WorkloadParams& params);

std::string workload_key(uint32_t index);

}  // namespace bizur::checker
