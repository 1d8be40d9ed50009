// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/harness/checker_run.hpp"

#include "bizur/sim/rng.hpp"

namespace bizur::harness {

ScenarioConfig checker_scenario(uint64_t seed, const CheckerRunParams& params) {
  ScenarioConfig cfg;
  cfg.name = "checker";
  cfg.seed = seed;
  cfg.servers = params.servers;
  cfg.shards = 1;
  cfg.buckets_per_shard = 16;
  cfg.persist = true;
  cfg.clients = params.clients;
  cfg.keys = params.keys != 0
                 ? params.keys
                 : 1 + static_cast<uint32_t>(sim::splitmix64(seed) % 64);
  cfg.mix = params.mix;
  cfg.value_size = 12;
  cfg.duration = sim_ms(params.duration_ms);
  cfg.drop_rate = params.drop_rate;
  cfg.fault = params.fault;
  cfg.check = true;
  for (double frac : params.kill_at) {
    SimTime at = static_cast<SimTime>(frac * static_cast<double>(cfg.duration));
    if (params.half_write_kills) {
      FaultEvent iso;
      iso.kind = FaultEvent::Kind::IsolateLeader;
      iso.at = at > sim_ms(20) ? at - sim_ms(20) : 0;
      cfg.faults.push_back(iso);
      FaultEvent heal;
      heal.kind = FaultEvent::Kind::Heal;
      heal.at = at + sim_ms(5);
      cfg.faults.push_back(heal);
    }
    FaultEvent f;
    f.kind = FaultEvent::Kind::CrashLeader;
    f.at = at;
    f.recover_after =
        params.kill_recover_fraction > 0.0
            ? static_cast<SimTime>(params.kill_recover_fraction *
                                   static_cast<double>(cfg.duration))
            : 0;
    cfg.faults.push_back(f);
  }
  return cfg;
}

CheckerRunResult run_checker_once(uint64_t seed,
                                  const CheckerRunParams& params) {
  ScenarioConfig cfg = checker_scenario(seed, params);
  ScenarioResult sr = run_scenario(cfg);
  CheckerRunResult out;
  out.seed = seed;
  out.verdict = *sr.verdict;
  out.history = std::move(sr.history);
  out.observer_violations = std::move(sr.observer_violations);
  return out;
}

}  // namespace bizur::harness
