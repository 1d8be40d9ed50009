// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
//
// Acceptance suite: one test case per release criterion, each printing a
// single PASS/FAIL line. Tolerances are pinned here, not tuned elsewhere.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <future>
#include <set>

#include "bizur/checker/checker.hpp"
#include "bizur/client/client.hpp"
#include "bizur/harness/checker_run.hpp"
#include "bizur/harness/cluster.hpp"
#include "bizur/harness/scenario.hpp"
#include "bizur/hash.hpp"
#include "bizur/sim/rng.hpp"

using namespace bizur;
using namespace bizur::harness;

namespace {

void report(int criterion, const char* name, bool ok) {
  std::printf("ACCEPTANCE %d %-28s %s\n", criterion, name,
              ok ? "PASS" : "FAIL");
  std::fflush(stdout);
}

bool acked(const checker::OpRecord& op) {
  if (!op.responded()) return false;
  using K = checker::Outcome::Kind;
  auto k = op.outcome->kind;
  return k == K::Value || k == K::Absent || k == K::Ok || k == K::CasMismatch;
}

// Seed-derived chaos scenario for the election-safety sweep: drops up to
// 20%, a partition wave, and a crash (leader or random server, with and
// without recovery).
ScenarioConfig claim1_scenario(uint64_t seed) {
  ScenarioConfig cfg;
  cfg.name = "claim1";
  cfg.seed = seed;
  cfg.servers = (seed % 2) ? 3 : 5;
  cfg.clients = 2;
  cfg.keys = 4;
  cfg.buckets_per_shard = 4;
  cfg.duration = sim_ms(300);
  cfg.drop_rate = 0.05 * static_cast<double>(sim::splitmix64(seed) % 5);
  cfg.mix = {0.3, 0.7, 0.0, 0.0};

  uint64_t r = sim::splitmix64(seed ^ 0xabcd);
  FaultEvent iso;
  iso.kind = FaultEvent::Kind::IsolateLeader;
  iso.at = sim_ms(60);
  iso.followers = r % 2;
  cfg.faults.push_back(iso);
  FaultEvent heal;
  heal.kind = FaultEvent::Kind::Heal;
  heal.at = sim_ms(140);
  cfg.faults.push_back(heal);

  FaultEvent crash;
  crash.at = sim_ms(170);
  switch (r % 3) {
    case 0:
      crash.kind = FaultEvent::Kind::CrashLeader;
      break;
    case 1:
      crash.kind = FaultEvent::Kind::CrashLeader;
      crash.recover_after = sim_ms(80);
      break;
    default:
      crash.kind = FaultEvent::Kind::Crash;
      crash.server = static_cast<uint32_t>(r % cfg.servers);
      crash.recover_after = sim_ms(100);
      break;
  }
  cfg.faults.push_back(crash);

  FaultEvent iso2;
  iso2.kind = FaultEvent::Kind::IsolateLeader;
  iso2.at = sim_ms(220);
  cfg.faults.push_back(iso2);
  FaultEvent heal2;
  heal2.kind = FaultEvent::Kind::Heal;
  heal2.at = sim_ms(270);
  cfg.faults.push_back(heal2);
  return cfg;
}

}  // namespace

TEST_CASE("criterion 1: election safety under chaos") {
  constexpr uint64_t kRuns = 10000;
  struct Shard {
    uint64_t marks = 0;
    std::vector<std::string> violations;
  };
  auto worker = [](uint64_t lo, uint64_t hi) {
    Shard out;
    for (uint64_t seed = lo; seed < hi; ++seed) {
      auto result = run_scenario(claim1_scenario(seed));
      out.marks += result.leader_marks;
      for (auto& v : result.observer_violations)
        out.violations.push_back("seed " + std::to_string(seed) + ": " + v);
    }
    return out;
  };
  auto half = std::async(std::launch::async, worker, 1, kRuns / 2 + 1);
  Shard b = worker(kRuns / 2 + 1, kRuns + 1);
  Shard a = half.get();

  uint64_t marks = a.marks + b.marks;
  std::vector<std::string> violations = a.violations;
  violations.insert(violations.end(), b.violations.begin(), b.violations.end());
  for (auto& v : violations) MESSAGE(v);

  bool ok = violations.empty() && marks > kRuns;  // elections really happened
  report(1, "election-safety", ok);
  CHECK(violations.empty());
  CHECK(marks > kRuns);
}

TEST_CASE("criterion 2: linearizability and checker self-test") {
  constexpr uint64_t kSeeds = 1000;
  struct Shard {
    uint64_t pass = 0;
    std::vector<std::string> failures;
  };
  auto worker = [](uint64_t lo, uint64_t hi) {
    Shard out;
    for (uint64_t seed = lo; seed < hi; ++seed) {
      CheckerRunParams params;  // 8 clients, 1..64 keys, 5% drop, one kill
      auto r = run_checker_once(seed, params);
      if (r.verdict.ok() && r.observer_violations.empty()) {
        out.pass++;
      } else {
        out.failures.push_back("seed " + std::to_string(seed) + ": " +
                               checker::verdict_name(r.verdict.kind) + " " +
                               r.verdict.detail);
      }
    }
    return out;
  };
  auto half = std::async(std::launch::async, worker, 1, kSeeds / 2 + 1);
  Shard b = worker(kSeeds / 2 + 1, kSeeds + 1);
  Shard a = half.get();
  for (auto& f : a.failures) MESSAGE(f);
  for (auto& f : b.failures) MESSAGE(f);
  bool clean = a.failures.empty() && b.failures.empty() &&
               a.pass + b.pass == kSeeds;

  // Self-test: the deliberately broken recovery (write-back removed) must
  // be caught within 200 seeds of the half-write kill scenario.
  auto mutant_params = []() {
    CheckerRunParams p;
    p.servers = 5;
    p.fault = NodeFault::SkipRecoveryWriteback;
    p.kill_at = {0.35, 0.55};
    p.half_write_kills = true;
    p.drop_rate = 0.02;
    p.mix = {0.55, 0.35, 0.05, 0.05};
    return p;
  };
  uint64_t caught_at = 0;
  for (uint64_t seed = 1; seed <= 200 && caught_at == 0; ++seed) {
    CheckerRunParams p = mutant_params();
    p.keys = 1 + (seed % 2);
    auto r = run_checker_once(seed, p);
    if (r.verdict.kind == checker::Verdict::Kind::Violation) caught_at = seed;
  }
  bool mutant_caught = caught_at != 0;
  if (mutant_caught)
    MESSAGE("mutant first caught at seed ", caught_at);

  report(2, "linearizability", clean);
  report(2, "checker-self-test", mutant_caught);
  CHECK(clean);
  CHECK(mutant_caught);
}

TEST_CASE("criterion 3: leader failure recovery") {
  // Detection timeout 100ms; RTT taken as two max one-way latencies (4ms).
  const SimTime kill_at = sim_sec(3);
  const SimTime budget = sim_ms(100) + 10 * 2 * sim_ms(2);
  bool all_ok = true;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig cfg;
    cfg.name = "leader-kill";
    cfg.seed = seed;
    cfg.clients = 32;
    cfg.keys = 1024;
    cfg.mix = {0.0, 1.0, 0.0, 0.0};
    cfg.value_size = 50;
    cfg.duration = sim_sec(6);
    FaultEvent kill;
    kill.kind = FaultEvent::Kind::CrashLeader;
    kill.at = kill_at;
    cfg.faults.push_back(kill);
    auto r = run_scenario(cfg);

    // First acknowledged operation that started after the kill: it can only
    // have been served by the new leader.
    SimTime first_ack = UINT64_MAX;
    for (const auto& op : r.history.ops()) {
      if (op.invoke_time <= kill_at || !acked(op)) continue;
      first_ack = std::min(first_ack, *op.respond_time);
    }
    bool resumed = first_ack != UINT64_MAX && first_ack - kill_at <= budget;

    // Throughput back to >= 90% of the pre-kill rate within one second.
    double pre = (r.per_second[1].ops + r.per_second[2].ops) / 2.0;
    bool recovered =
        static_cast<double>(r.per_second[4].ops) >= 0.9 * pre &&
        static_cast<double>(r.per_second[5].ops) >= 0.9 * pre;
    if (!resumed || !recovered) {
      MESSAGE("seed ", seed, ": first ack after ",
              (first_ack - kill_at) / 1000.0, " ms, s4=", r.per_second[4].ops,
              " pre=", pre);
      all_ok = false;
    }
    CHECK(resumed);
    CHECK(recovered);
  }
  report(3, "leader-failure-recovery", all_ok);
}

TEST_CASE("criterion 4: packet drop robustness") {
  auto run_with_drop = [](double drop) {
    ScenarioConfig cfg;
    cfg.name = "drop";
    cfg.seed = 4;
    cfg.clients = 64;
    cfg.keys = 16384;
    cfg.mix = {0.0, 1.0, 0.0, 0.0};
    cfg.value_size = 50;
    cfg.duration = sim_sec(8);
    cfg.drop_rate = drop;
    return run_scenario(cfg);
  };
  auto baseline = run_with_drop(0.0);
  auto dropped = run_with_drop(0.05);

  double ratio = dropped.throughput_ops / baseline.throughput_ops;
  bool throughput_ok = ratio >= 0.5;
  bool no_stall = true;
  for (const auto& row : dropped.per_second) no_stall &= row.ops > 0;
  MESSAGE("throughput ratio at 5% drop: ", ratio);

  bool ok = throughput_ok && no_stall && baseline.observer_violations.empty() &&
            dropped.observer_violations.empty();
  report(4, "packet-drop-robustness", ok);
  CHECK(throughput_ok);
  CHECK(no_stall);
}

TEST_CASE("criterion 5: optimization round-trip counts") {
  sim::Simulation sim(sim::SimConfig{});
  LeaderObserver observer;
  ClusterOptions opt;
  opt.sweep_interval = 0;
  Cluster cluster(sim, opt, &observer);
  ServerId addr = sim.new_endpoint(sim.add_host());
  ClientActor client(sim, addr, 0, {cluster.descriptor()}, RouterOptions{});
  sim.bind(addr, &client);

  sim.send(Envelope{sim.next_msg_id(), addr, cluster.address(0),
                    TriggerElection{}});
  while (!cluster.leader_index()) REQUIRE(sim.step());
  NodeInstance& leader = *cluster.leader();

  auto submit = [&](KvRequest req) {
    std::optional<SubmitResult> out;
    client.submit(std::move(req), [&](SubmitResult r) { out = r; });
    while (!out) REQUIRE(sim.step());
    REQUIRE(out->status == SubmitStatus::Ok);
    return out->response;
  };
  auto set_req = [](const std::string& k, const std::string& v) {
    KvRequest r;
    r.op = KvOp::Set;
    r.key = k;
    r.value = v;
    return r;
  };

  // First post-election access to a bucket: at most two round-trips.
  auto before = leader.metrics();
  submit(set_req("a-key", "v"));
  auto after = leader.metrics();
  bool first_access_ok = after.rounds_total() - before.rounds_total() <= 2;

  // Steady-state Set/Delete: exactly one cluster round-trip, and exactly
  // n-1 ReplicaWrite envelopes on the wire.
  before = after;
  uint64_t wire_before = sim.net_stats().at("ReplicaWrite").sent;
  submit(set_req("a-key", "v2"));
  after = leader.metrics();
  uint64_t wire_after = sim.net_stats().at("ReplicaWrite").sent;
  bool set_ok = after.write_rounds - before.write_rounds == 1 &&
                after.rounds_total() - before.rounds_total() == 1 &&
                wire_after - wire_before == cluster.size() - 1;

  KvRequest del;
  del.op = KvOp::Delete;
  del.key = "a-key";
  before = after;
  submit(del);
  after = leader.metrics();
  bool delete_ok = after.write_rounds - before.write_rounds == 1 &&
                   after.rounds_total() - before.rounds_total() == 1;

  // Steady-state Get: exactly one validation round-trip.
  submit(set_req("a-key", "v3"));
  before = leader.metrics();
  KvRequest get;
  get.op = KvOp::Get;
  get.key = "a-key";
  submit(get);
  after = leader.metrics();
  bool get_ok = after.validate_rounds - before.validate_rounds == 1 &&
                after.rounds_total() - before.rounds_total() == 1;

  // Batched IterateKeys over 64 recovered buckets: one validation round
  // trip, zero bucket payloads on the wire.
  KvRequest iter;
  iter.op = KvOp::IterateKeys;
  submit(iter);  // recovers every remaining bucket first
  uint64_t payloads_before = sim.delivered("AckReadData");
  before = leader.metrics();
  auto keys = submit(iter);
  after = leader.metrics();
  bool iterate_ok = keys.kind == KvResponse::Kind::Keys &&
                    after.validate_rounds - before.validate_rounds == 1 &&
                    after.rounds_total() - before.rounds_total() == 1 &&
                    sim.delivered("AckReadData") == payloads_before;

  bool ok = first_access_ok && set_ok && delete_ok && get_ok && iterate_ok;
  report(5, "optimization-round-trips", ok);
  CHECK(first_access_ok);
  CHECK(set_ok);
  CHECK(delete_ok);
  CHECK(get_ok);
  CHECK(iterate_ok);
}

TEST_CASE("criterion 6: lazy recovery") {
  sim::Simulation sim(sim::SimConfig{});
  LeaderObserver observer;
  ClusterOptions opt;
  opt.sweep_interval = 0;  // no background recovery: only client traffic
  Cluster cluster(sim, opt, &observer);
  ServerId addr = sim.new_endpoint(sim.add_host());
  ClientActor client(sim, addr, 0, {cluster.descriptor()}, RouterOptions{});
  sim.bind(addr, &client);
  sim.send(Envelope{sim.next_msg_id(), addr, cluster.address(0),
                    TriggerElection{}});
  while (!cluster.leader_index()) REQUIRE(sim.step());
  NodeInstance& leader = *cluster.leader();

  // Quiesce: with no client traffic and no sweep, an elected leader
  // performs zero recovery traffic.
  sim.run_for(sim_ms(500));
  bool untouched_quiet = leader.metrics().read_data_rounds == 0 &&
                         leader.metrics().write_rounds == 0;

  auto submit = [&](KvRequest req) {
    std::optional<SubmitResult> out;
    client.submit(std::move(req), [&](SubmitResult r) { out = r; });
    while (!out) REQUIRE(sim.step());
    REQUIRE(out->status == SubmitStatus::Ok);
    return out->response;
  };
  KvRequest get;
  get.op = KvOp::Get;
  get.key = "the-key";

  // First access: exactly one read majority plus one write majority.
  auto before = leader.metrics();
  submit(get);
  auto after = leader.metrics();
  bool first_ok = after.read_data_rounds - before.read_data_rounds == 1 &&
                  after.write_rounds - before.write_rounds == 1 &&
                  after.validate_rounds - before.validate_rounds == 0;

  // Second access: read-majority (validation) only.
  before = after;
  submit(get);
  after = leader.metrics();
  bool second_ok = after.validate_rounds - before.validate_rounds == 1 &&
                   after.read_data_rounds == before.read_data_rounds &&
                   after.write_rounds == before.write_rounds;

  // Untouched buckets stay unrecovered.
  uint32_t touched = hash_key("the-key", leader.num_buckets(), kBucketHashSeed);
  bool others_unrecovered = true;
  for (uint32_t i = 0; i < leader.num_buckets(); ++i) {
    if (i == touched) continue;
    others_unrecovered &= !leader.bucket_recovered(i);
  }
  bool recovered_once = leader.metrics().recoveries == 1;

  bool ok = untouched_quiet && first_ok && second_ok && others_unrecovered &&
            recovered_once;
  report(6, "lazy-recovery", ok);
  CHECK(untouched_quiet);
  CHECK(first_ok);
  CHECK(second_ok);
  CHECK(others_unrecovered);
  CHECK(recovered_once);
}

TEST_CASE("criterion 7: reconfiguration correctness") {
  struct Shape {
    const char* name;
    std::vector<uint32_t> new_hosts;
  };
  const Shape shapes[] = {
      {"same", {0, 1, 2}},
      {"overlapping", {1, 2, 3}},
      {"disjoint", {3, 4, 5}},
  };
  bool all_ok = true;
  for (const Shape& shape : shapes) {
    ScenarioConfig cfg;
    cfg.seed = 101 + shape.new_hosts[0];
    cfg.servers = 3;
    cfg.buckets_per_shard = 8;
    cfg.clients = 4;
    cfg.keys = 24;
    cfg.value_size = 8;
    cfg.duration = sim_ms(2500);
    cfg.mix = {0.25, 0.55, 0.10, 0.10};

    sim::Simulation sim(sim::SimConfig{.seed = cfg.seed});
    World world(sim, cfg);
    checker::History history;
    world.start_workload(&history, cfg.duration);
    sim.schedule(sim_ms(600), "reconfig", [&]() {
      world.start_reconfig(0, shape.new_hosts);
    });
    // One crash per instance. Host 0 serves only the old instance in the
    // overlapping/disjoint shapes; the highest new host only the new one.
    sim.schedule(sim_ms(700), "crash-old", [&]() {
      sim.crash_recover(world.server_host(0), sim_ms(400), nullptr);
    });
    uint32_t new_host = shape.new_hosts.back();
    if (new_host != 0) {
      sim.schedule(sim_ms(900), "crash-new", [&]() {
        sim.crash_recover(world.server_host(new_host), sim_ms(400), nullptr);
      });
    }
    sim.run_until(cfg.duration + 3 * cfg.detection_timeout);

    bool complete = world.reconfig_complete(0);
    // crash_recover of cluster hosts needs the harness rebuild hook; here
    // the host stays down instead (crash-stop with a scheduled no-op), so
    // a minority is simply missing: either way both instances lost a node.
    auto verdict = checker::check(history);
    bool linearizable = verdict.ok();
    bool observer_ok = !world.observer().violated();

    Cluster* old_cluster = world.old_instance(0);
    bool drain_clean =
        old_cluster != nullptr && old_cluster->total_ops_executed_draining() == 0;

    // Final state equals the oracle replay for every untainted key.
    bool state_ok = complete;
    if (complete) {
      std::vector<std::string> tainted;
      auto oracle = history.oracle_map(&tainted);
      std::set<std::string> skip(tainted.begin(), tainted.end());
      ServerId probe_addr = sim.new_endpoint(sim.add_host());
      ClientActor probe(sim, probe_addr, 99,
                        world.shard_map().descriptors(), RouterOptions{});
      sim.bind(probe_addr, &probe);
      for (uint32_t i = 0; i < cfg.keys && state_ok; ++i) {
        std::string key = checker::workload_key(i);
        if (skip.count(key)) continue;
        KvRequest get;
        get.op = KvOp::Get;
        get.key = key;
        std::optional<SubmitResult> out;
        probe.submit(get, [&](SubmitResult r) { out = r; });
        SimTime deadline = sim.now() + sim_sec(5);
        while (!out && sim.now() < deadline) {
          if (!sim.step()) break;
        }
        if (!out || out->status != SubmitStatus::Ok) {
          state_ok = false;
          break;
        }
        auto want = oracle.find(key);
        if (want == oracle.end()) {
          state_ok &= out->response.kind == KvResponse::Kind::Absent;
        } else {
          state_ok &= out->response.kind == KvResponse::Kind::Value &&
                      out->response.value == want->second;
        }
      }
    }

    bool ok =
        complete && linearizable && observer_ok && drain_clean && state_ok;
    if (!ok) {
      MESSAGE(shape.name, ": complete=", complete, " lin=", linearizable,
              " observer=", observer_ok, " drain=", drain_clean,
              " state=", state_ok);
      all_ok = false;
    }
    CHECK(ok);
  }
  report(7, "reconfiguration", all_ok);
}

TEST_CASE("criterion 8: independence and shard scaling") {
  // Part 1: delaying one bucket's quorum traffic by 50ms must not move the
  // p99 of other buckets' operations by a simulated millisecond.
  auto run_pinned = [](bool delay_bucket0) {
    ScenarioConfig cfg;
    cfg.seed = 42;
    cfg.buckets_per_shard = 8;
    cfg.quorum_timeout = sim_ms(200);  // delayed quorums must still resolve
    cfg.clients = 1;                   // world clients unused; we pin our own

    sim::Simulation sim(sim::SimConfig{.seed = cfg.seed});
    World world(sim, cfg);
    if (delay_bucket0) world.delay_bucket(0, sim_ms(50));

    // Four keys for each of buckets 0..6. Group A hammers bucket 0 (the
    // delayed one); every group-B client owns a private bucket, so its
    // latency reflects pure protocol round-trips, not intra-group queueing.
    std::vector<std::vector<std::string>> keys_of_bucket(7);
    {
      uint32_t filled = 0;
      for (int i = 0; filled < 7; ++i) {
        std::string key = "pin" + std::to_string(i);
        uint32_t b = hash_key(key, 8, kBucketHashSeed);
        if (b >= 7 || keys_of_bucket[b].size() >= 4) continue;
        keys_of_bucket[b].push_back(key);
        if (keys_of_bucket[b].size() == 4) ++filled;
      }
    }
    struct Driver {
      ClientActor* client = nullptr;
      std::vector<std::string> keys;
      sim::Rng rng{0};
      std::vector<uint64_t>* latencies = nullptr;
      sim::Simulation* sim = nullptr;
      SimTime stop = 0;
      uint64_t seq = 0;

      void issue() {
        if (sim->now() >= stop) return;
        KvRequest req;
        req.op = KvOp::Set;
        req.key = keys[rng.next() % keys.size()];
        req.value = "v" + std::to_string(seq++);
        SimTime started = sim->now();
        client->submit(req, [this, started](SubmitResult r) {
          if (r.status == SubmitStatus::Ok && latencies)
            latencies->push_back(sim->now() - started);
          issue();
        });
      }
    };
    std::vector<std::unique_ptr<ClientActor>> actors;
    std::vector<std::unique_ptr<Driver>> drivers;
    std::vector<uint64_t> rest_latencies;
    auto add_client = [&](uint32_t idx, std::vector<std::string> keys,
                          std::vector<uint64_t>* lat) {
      ServerId a = sim.new_endpoint(sim.add_host());
      actors.push_back(std::make_unique<ClientActor>(
          sim, a, idx, world.shard_map().descriptors(), RouterOptions{}));
      sim.bind(a, actors.back().get());
      auto d = std::make_unique<Driver>();
      d->client = actors.back().get();
      d->keys = std::move(keys);
      d->rng = sim::Rng(sim::derive_seed(7, idx));
      d->latencies = lat;
      d->sim = &sim;
      d->stop = sim_sec(3);
      drivers.push_back(std::move(d));
    };
    for (uint32_t c = 0; c < 3; ++c) add_client(c, keys_of_bucket[0], nullptr);
    for (uint32_t c = 3; c < 9; ++c)
      add_client(c, keys_of_bucket[c - 2], &rest_latencies);
    for (auto& d : drivers) d->issue();
    sim.run_until(sim_sec(3) + sim_ms(400));

    REQUIRE(rest_latencies.size() > 1000);
    std::sort(rest_latencies.begin(), rest_latencies.end());
    size_t idx = (rest_latencies.size() * 99 + 99) / 100;
    return static_cast<double>(rest_latencies[idx - 1]) / 1000.0;  // ms
  };
  double p99_baseline = run_pinned(false);
  double p99_delayed = run_pinned(true);
  double shift = std::abs(p99_delayed - p99_baseline);
  MESSAGE("independence p99 shift: ", shift, " ms (", p99_baseline, " -> ",
          p99_delayed, ")");
  bool independent = shift < 1.0;

  // Part 2: doubling the shard count with fixed per-shard load keeps the
  // per-shard p99 within 5%. Load is fixed by pinning eight dedicated
  // clients to every shard, each drawing keys owned by that shard only.
  auto shard_p99 = [](uint32_t shards) {
    ScenarioConfig cfg;
    cfg.seed = 9;
    cfg.shards = shards;
    cfg.buckets_per_shard = 16;
    cfg.clients = 1;  // world clients unused; pinned drivers below

    sim::Simulation sim(sim::SimConfig{.seed = cfg.seed});
    World world(sim, cfg);

    // 64 keys owned by each shard, exactly four per bucket, so every
    // shard's workload has an identical key-to-bucket profile; with
    // same-bucket operations serialized, tail latency is dominated by
    // bucket collisions and a lopsided pool would skew the comparison.
    std::vector<std::vector<std::string>> pools(shards);
    {
      std::vector<std::vector<uint32_t>> per_bucket(
          shards, std::vector<uint32_t>(16, 0));
      uint32_t filled = 0;
      for (int i = 0; filled < shards * 16; ++i) {
        std::string key = "sk" + std::to_string(i);
        uint32_t s = hash_key(key, shards);
        uint32_t b = hash_key(key, 16, kBucketHashSeed);
        if (per_bucket[s][b] >= 4) continue;
        if (++per_bucket[s][b] == 4) ++filled;
        pools[s].push_back(key);
      }
    }
    struct Driver {
      ClientActor* client = nullptr;
      std::vector<std::string> keys;
      sim::Rng rng{0};
      std::vector<uint64_t>* latencies = nullptr;
      sim::Simulation* sim = nullptr;
      SimTime stop = 0;
      uint64_t seq = 0;
      void issue() {
        if (sim->now() >= stop) return;
        KvRequest req;
        req.op = KvOp::Set;
        req.key = keys[rng.next() % keys.size()];
        req.value = "v" + std::to_string(seq++);
        SimTime started = sim->now();
        client->submit(req, [this, started](SubmitResult r) {
          if (r.status == SubmitStatus::Ok)
            latencies->push_back(sim->now() - started);
          issue();
        });
      }
    };
    std::vector<std::unique_ptr<ClientActor>> actors;
    std::vector<std::unique_ptr<Driver>> drivers;
    std::vector<std::vector<uint64_t>> lat(shards);
    for (uint32_t s = 0; s < shards; ++s) {
      for (uint32_t c = 0; c < 8; ++c) {
        ServerId a = sim.new_endpoint(sim.add_host());
        actors.push_back(std::make_unique<ClientActor>(
            sim, a, s * 8 + c, world.shard_map().descriptors(),
            RouterOptions{}));
        sim.bind(a, actors.back().get());
        auto d = std::make_unique<Driver>();
        d->client = actors.back().get();
        d->keys = pools[s];
        // Same draw stream for client c of every shard: pools are
        // bucket-aligned, so the workloads stay isomorphic across shards.
        d->rng = sim::Rng(sim::derive_seed(13, c));
        d->latencies = &lat[s];
        d->sim = &sim;
        d->stop = sim_sec(3);
        drivers.push_back(std::move(d));
      }
    }
    for (auto& d : drivers) d->issue();
    sim.run_until(sim_sec(3) + sim_ms(400));

    double sum = 0;
    for (auto& v : lat) {
      REQUIRE(v.size() > 500);
      std::sort(v.begin(), v.end());
      sum += static_cast<double>(v[(v.size() * 99 + 99) / 100 - 1]) / 1000.0;
    }
    return sum / shards;
  };
  double p99_2 = shard_p99(2);
  double p99_4 = shard_p99(4);
  double rel = std::abs(p99_4 - p99_2) / p99_2;
  MESSAGE("per-shard p99: 2 shards ", p99_2, " ms, 4 shards ", p99_4,
          " ms, rel diff ", rel);
  bool scales = rel <= 0.05;

  report(8, "independence-and-scaling", independent && scales);
  CHECK(independent);
  CHECK(scales);
}

TEST_CASE("criterion 9: determinism") {
  ScenarioConfig cfg;
  cfg.name = "det";
  cfg.seed = 321;
  cfg.clients = 16;
  cfg.keys = 256;
  cfg.duration = sim_sec(2);
  cfg.drop_rate = 0.05;
  cfg.trace = true;
  cfg.check = true;
  FaultEvent kill;
  kill.kind = FaultEvent::Kind::CrashLeader;
  kill.at = sim_ms(800);
  kill.recover_after = sim_ms(400);
  cfg.faults.push_back(kill);
  FaultEvent iso;
  iso.kind = FaultEvent::Kind::IsolateLeader;
  iso.at = sim_ms(1400);
  cfg.faults.push_back(iso);
  FaultEvent heal;
  heal.kind = FaultEvent::Kind::Heal;
  heal.at = sim_ms(1600);
  cfg.faults.push_back(heal);

  auto a = run_scenario(cfg);
  auto b = run_scenario(cfg);
  bool identical = a.csv == b.csv && a.trace == b.trace &&
                   a.history.to_text() == b.history.to_text();
  cfg.seed = 322;
  auto c = run_scenario(cfg);
  bool seed_matters = a.trace != c.trace;

  bool ok = identical && seed_matters && !a.trace.empty() &&
            a.verdict && a.verdict->ok();
  report(9, "determinism", ok);
  CHECK(identical);
  CHECK(seed_matters);
  REQUIRE(a.verdict.has_value());
  CHECK(a.verdict->ok());
}
