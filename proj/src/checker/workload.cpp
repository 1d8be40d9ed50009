// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/checker/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bizur/assert.hpp"

namespace bizur::checker {

std::string workload_key(uint32_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "k%05u", index);
  return buf;
}

ClientScript::ClientScript(uint64_t seed, uint32_t client_index,
                           WorkloadParams params)
    : rng_(sim::derive_seed(seed, 0x9000 + client_index)),
      client_index_(client_index),
      params_(params) {
  BIZUR_ASSERT(params_.keys >= 1, "workload needs at least one key");
  if (params_.dist == KeyDist::Zipf) {
    zipf_cdf_.resize(params_.keys);
    double total = 0.0;
    for (uint32_t i = 0; i < params_.keys; ++i) {
      double w = params_.zipf_s == 1.0
                     ? 1.0 / static_cast<double>(i + 1)
                     : std::pow(static_cast<double>(i + 1), -params_.zipf_s);
      total += w;
      zipf_cdf_[i] = total;
    }
    for (auto& c : zipf_cdf_) c /= total;
  }
}

std::string ClientScript::pick_key() {
  if (params_.dist == KeyDist::Uniform) {
    return workload_key(static_cast<uint32_t>(rng_.uniform(0, params_.keys - 1)));
  }
  double u = rng_.uniform01();
  auto it = std::lower_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
  uint32_t idx = static_cast<uint32_t>(it - zipf_cdf_.begin());
  if (idx >= params_.keys) idx = params_.keys - 1;
  return workload_key(idx);
}

ScriptOp ClientScript::next() {
  ScriptOp op;
  op.key = pick_key();
  double u = rng_.uniform01();
  const OpMix& mix = params_.mix;
  double total = mix.get + mix.set + mix.del + mix.cas;
  u *= total > 0 ? total : 1.0;
  if (u < mix.get) {
    op.op = KvOp::Get;
  } else if (u < mix.get + mix.set) {
    op.op = KvOp::Set;
  } else if (u < mix.get + mix.set + mix.del) {
    op.op = KvOp::Delete;
  } else {
    // Conditional ops lean towards cas_set; deletes still appear.
    op.op = rng_.uniform01() < 0.7 ? KvOp::CasSet : KvOp::CasDelete;
  }
  if (op.op == KvOp::Set || op.op == KvOp::CasSet) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%03u-%06llu", client_index_,
                  static_cast<unsigned long long>(seq_++));
    op.value = buf;
    if (op.value.size() < params_.value_size)
      op.value.append(params_.value_size - op.value.size(), '.');
  }
  return op;
}

std::vector<ClientScript> generate_workload(uint64_t seed,
                                            const WorkloadParams& params) {
  std::vector<ClientScript> scripts;
  scripts.reserve(params.clients);
  for (uint32_t c = 0; c < params.clients; ++c)
    scripts.emplace_back(seed, c, params);
  return scripts;
}

}  // namespace bizur::checker
