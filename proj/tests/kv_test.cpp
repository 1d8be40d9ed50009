// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bizur/checker/checker.hpp"
#include "bizur/client/client.hpp"
#include "bizur/harness/cluster.hpp"
#include "bizur/hash.hpp"
#include "bizur/sim/simulation.hpp"

using namespace bizur;
using namespace bizur::harness;

namespace {

struct Rig {
  sim::Simulation sim;
  LeaderObserver observer;
  Cluster cluster;
  std::unique_ptr<ClientActor> client_actor;

  explicit Rig(ClusterOptions opt = {}, sim::SimConfig scfg = {})
      : sim(scfg), cluster(sim, opt, &observer) {
    auto host = sim.add_host();
    ServerId addr = sim.new_endpoint(host);
    RouterOptions ropt;
    client_actor = std::make_unique<ClientActor>(
        sim, addr, 0,
        std::vector<InstanceDescriptor>{cluster.descriptor()}, ropt);
    sim.bind(addr, client_actor.get());
  }

  void elect(size_t node_index = 0) {
    sim.send(Envelope{sim.next_msg_id(), client_actor->self(),
                      cluster.address(node_index), TriggerElection{}});
    for (int i = 0; i < 100000; ++i) {
      if (cluster.leader_index().has_value() &&
          *cluster.leader_index() == node_index)
        return;
      REQUIRE(sim.step());
    }
    FAIL("no leader elected");
  }

  SubmitResult submit(KvRequest req) {
    std::optional<SubmitResult> out;
    client_actor->submit(std::move(req), [&](SubmitResult r) { out = r; });
    for (int i = 0; i < 400000 && !out; ++i) {
      REQUIRE(sim.step());
    }
    REQUIRE(out.has_value());
    return *out;
  }

  SubmitResult set(const std::string& k, const std::string& v) {
    KvRequest r;
    r.op = KvOp::Set;
    r.key = k;
    r.value = v;
    return submit(r);
  }
  SubmitResult get(const std::string& k) {
    KvRequest r;
    r.op = KvOp::Get;
    r.key = k;
    return submit(r);
  }
  SubmitResult del(const std::string& k) {
    KvRequest r;
    r.op = KvOp::Delete;
    r.key = k;
    return submit(r);
  }
  SubmitResult cas_set(const std::string& k,
                       std::optional<std::string> expected,
                       const std::string& v) {
    KvRequest r;
    r.op = KvOp::CasSet;
    r.key = k;
    r.value = v;
    r.expected = std::move(expected);
    return submit(r);
  }
  SubmitResult cas_del(const std::string& k,
                       std::optional<std::string> expected) {
    KvRequest r;
    r.op = KvOp::CasDelete;
    r.key = k;
    r.expected = std::move(expected);
    return submit(r);
  }
  SubmitResult iterate() {
    KvRequest r;
    r.op = KvOp::IterateKeys;
    return submit(r);
  }

  NodeMetrics leader_metrics() { return cluster.leader()->metrics(); }
};

ClusterOptions no_sweep() {
  ClusterOptions opt;
  opt.sweep_interval = 0;
  return opt;
}

}  // namespace

TEST_CASE("get/set/delete register semantics") {
  Rig rig(no_sweep());
  rig.elect();

  CHECK(rig.get("k").response.kind == KvResponse::Kind::Absent);
  CHECK(rig.set("k", "v1").response.kind == KvResponse::Kind::Ok);
  auto g = rig.get("k");
  CHECK(g.response.kind == KvResponse::Kind::Value);
  CHECK(g.response.value == "v1");
  CHECK(rig.set("k", "v2").response.kind == KvResponse::Kind::Ok);
  CHECK(rig.get("k").response.value == "v2");
  CHECK(rig.del("k").response.kind == KvResponse::Kind::Ok);
  CHECK(rig.get("k").response.kind == KvResponse::Kind::Absent);
  // deleting an absent key is an acknowledged no-op
  CHECK(rig.del("k").response.kind == KvResponse::Kind::Ok);
}

TEST_CASE("steady-state message counts: one round-trip per operation") {
  Rig rig(no_sweep());
  rig.elect();

  // First access recovers lazily: one data read + one write, and the write
  // carries the mutation (two round-trips total).
  auto before = rig.leader_metrics();
  CHECK(rig.set("key", "v0").response.kind == KvResponse::Kind::Ok);
  auto after = rig.leader_metrics();
  CHECK(after.read_data_rounds - before.read_data_rounds == 1);
  CHECK(after.write_rounds - before.write_rounds == 1);
  CHECK(after.validate_rounds - before.validate_rounds == 0);
  CHECK(after.rounds_total() - before.rounds_total() == 2);

  // Steady-state set: exactly one cluster round-trip, no read.
  before = after;
  CHECK(rig.set("key", "v1").response.kind == KvResponse::Kind::Ok);
  after = rig.leader_metrics();
  CHECK(after.write_rounds - before.write_rounds == 1);
  CHECK(after.rounds_total() - before.rounds_total() == 1);

  // Steady-state get: exactly one validation round, answered locally.
  before = after;
  CHECK(rig.get("key").response.value == "v1");
  after = rig.leader_metrics();
  CHECK(after.validate_rounds - before.validate_rounds == 1);
  CHECK(after.rounds_total() - before.rounds_total() == 1);

  // Steady-state delete: one write round.
  before = after;
  CHECK(rig.del("key").response.kind == KvResponse::Kind::Ok);
  after = rig.leader_metrics();
  CHECK(after.write_rounds - before.write_rounds == 1);
  CHECK(after.rounds_total() - before.rounds_total() == 1);
}

TEST_CASE("first get after election: recovery read + write-back, no validation") {
  Rig rig(no_sweep());
  rig.elect();
  auto before = rig.leader_metrics();
  CHECK(rig.get("some-key").response.kind == KvResponse::Kind::Absent);
  auto after = rig.leader_metrics();
  CHECK(after.read_data_rounds - before.read_data_rounds == 1);
  CHECK(after.write_rounds - before.write_rounds == 1);
  CHECK(after.validate_rounds - before.validate_rounds == 0);

  // Second get: validation only.
  before = after;
  CHECK(rig.get("some-key").response.kind == KvResponse::Kind::Absent);
  after = rig.leader_metrics();
  CHECK(after.validate_rounds - before.validate_rounds == 1);
  CHECK(after.rounds_total() - before.rounds_total() == 1);
}

TEST_CASE("compare-and-set") {
  Rig rig(no_sweep());
  rig.elect();

  SUBCASE("cas on an absent key") {
    CHECK(rig.cas_set("k", std::nullopt, "v").response.kind ==
          KvResponse::Kind::Ok);
    CHECK(rig.get("k").response.value == "v");
  }
  SUBCASE("mismatch reports the actual value and changes nothing") {
    rig.set("k", "v3");
    auto r = rig.cas_set("k", "v1", "v2");
    CHECK(r.response.kind == KvResponse::Kind::CasMismatch);
    CHECK(r.response.actual == "v3");
    CHECK(rig.get("k").response.value == "v3");
  }
  SUBCASE("mismatch against absent") {
    rig.set("k", "v");
    auto r = rig.cas_set("k", std::nullopt, "v2");
    CHECK(r.response.kind == KvResponse::Kind::CasMismatch);
    CHECK(r.response.actual == "v");
  }
  SUBCASE("cas_delete") {
    rig.set("k", "v");
    CHECK(rig.cas_del("k", "wrong").response.kind ==
          KvResponse::Kind::CasMismatch);
    CHECK(rig.cas_del("k", "v").response.kind == KvResponse::Kind::Ok);
    CHECK(rig.get("k").response.kind == KvResponse::Kind::Absent);
  }
  SUBCASE("steady-state cas costs one round; mismatch costs one validation") {
    rig.set("k", "v0");
    auto before = rig.leader_metrics();
    CHECK(rig.cas_set("k", "v0", "v1").response.kind == KvResponse::Kind::Ok);
    auto after = rig.leader_metrics();
    CHECK(after.write_rounds - before.write_rounds == 1);
    CHECK(after.rounds_total() - before.rounds_total() == 1);

    before = after;
    CHECK(rig.cas_set("k", "v0", "v2").response.kind ==
          KvResponse::Kind::CasMismatch);
    after = rig.leader_metrics();
    CHECK(after.validate_rounds - before.validate_rounds == 1);
    CHECK(after.rounds_total() - before.rounds_total() == 1);
  }
}

TEST_CASE("two concurrent cas on one key: exactly one wins") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    sim::SimConfig scfg;
    scfg.seed = seed;
    Rig rig(no_sweep(), scfg);
    rig.elect();
    rig.set("k", "v0");

    // Second client.
    auto host = rig.sim.add_host();
    ServerId addr2 = rig.sim.new_endpoint(host);
    RouterOptions ropt;
    ClientActor client2(rig.sim, addr2, 1,
                        {rig.cluster.descriptor()}, ropt);
    rig.sim.bind(addr2, &client2);

    std::optional<SubmitResult> r1, r2;
    KvRequest c1;
    c1.op = KvOp::CasSet;
    c1.key = "k";
    c1.expected = "v0";
    c1.value = "a";
    KvRequest c2 = c1;
    c2.value = "b";
    rig.client_actor->submit(c1, [&](SubmitResult r) { r1 = r; });
    client2.submit(c2, [&](SubmitResult r) { r2 = r; });
    while (!r1 || !r2) REQUIRE(rig.sim.step());

    int oks = 0, mismatches = 0;
    for (auto* r : {&r1, &r2}) {
      REQUIRE((*r)->status == SubmitStatus::Ok);
      if ((**r).response.kind == KvResponse::Kind::Ok) ++oks;
      if ((**r).response.kind == KvResponse::Kind::CasMismatch) ++mismatches;
    }
    CHECK(oks == 1);
    CHECK(mismatches == 1);
    auto final = rig.get("k");
    CHECK((final.response.value == "a" || final.response.value == "b"));
  }
}

TEST_CASE("iterate_keys") {
  ClusterOptions opt = no_sweep();
  Rig rig(opt);
  rig.elect();

  SUBCASE("empty store yields the empty set") {
    auto r = rig.iterate();
    CHECK(r.response.kind == KvResponse::Kind::Keys);
    CHECK(r.response.keys.empty());
  }
  SUBCASE("union of all buckets, sorted") {
    std::vector<std::string> keys = {"ka", "kb", "kc", "kd", "ke"};
    for (const auto& k : keys) rig.set(k, "v-" + k);
    auto r = rig.iterate();
    REQUIRE(r.response.kind == KvResponse::Kind::Keys);
    CHECK(r.response.keys == keys);  // sorted
  }
  SUBCASE("batched validation: one round trip, no bucket payloads") {
    rig.set("warm", "x");  // make sure at least one bucket has content
    // Recover every bucket first so the batch path has nothing to recover.
    auto warm = rig.iterate();
    REQUIRE(warm.response.kind == KvResponse::Kind::Keys);

    auto data_before = rig.sim.delivered("AckReadData");
    auto before = rig.leader_metrics();
    auto r = rig.iterate();
    REQUIRE(r.response.kind == KvResponse::Kind::Keys);
    auto after = rig.leader_metrics();
    CHECK(after.validate_rounds - before.validate_rounds == 1);
    CHECK(after.rounds_total() - before.rounds_total() == 1);
    CHECK(rig.sim.delivered("AckReadData") == data_before);
  }
}

TEST_CASE("oversized requests are rejected client-side") {
  Rig rig(no_sweep());
  rig.elect();
  KvRequest big;
  big.op = KvOp::Set;
  big.key = "k";
  big.value.assign(kMaxValueBytes + 1, 'x');
  std::optional<SubmitResult> out;
  rig.client_actor->submit(big, [&](SubmitResult r) { out = r; });
  REQUIRE(out.has_value());
  CHECK(out->status == SubmitStatus::Invalid);

  KvRequest long_key;
  long_key.op = KvOp::Get;
  long_key.key.assign(kMaxKeyBytes + 1, 'k');
  out.reset();
  rig.client_actor->submit(long_key, [&](SubmitResult r) { out = r; });
  REQUIRE(out.has_value());
  CHECK(out->status == SubmitStatus::Invalid);
}

TEST_CASE("background sweep recovers every bucket without client traffic") {
  ClusterOptions opt;
  opt.sweep_interval = sim_ms(2);
  opt.num_buckets = 16;
  Rig rig(opt);
  rig.elect();
  rig.sim.run_for(sim_ms(300));
  NodeInstance* leader = rig.cluster.leader();
  REQUIRE(leader != nullptr);
  for (uint32_t i = 0; i < 16; ++i) {
    CHECK(leader->local_bucket(i).ver.elect_id == leader->elect_id());
  }
  // The sweep recovered each bucket exactly once.
  CHECK(leader->metrics().recoveries == 16);

  // A client get touching a swept bucket needs only validation now.
  auto before = leader->metrics();
  CHECK(rig.get("anything").response.kind == KvResponse::Kind::Absent);
  auto after = leader->metrics();
  CHECK(after.validate_rounds - before.validate_rounds == 1);
  CHECK(after.rounds_total() - before.rounds_total() == 1);
}

TEST_CASE("client read races the sweep: bucket recovered exactly once") {
  ClusterOptions opt;
  opt.sweep_interval = sim_ms(1);
  opt.num_buckets = 4;
  Rig rig(opt);
  rig.elect();
  // Fire a get immediately; the sweep starts concurrently.
  CHECK(rig.get("k").response.kind == KvResponse::Kind::Absent);
  rig.sim.run_for(sim_ms(50));
  NodeInstance* leader = rig.cluster.leader();
  REQUIRE(leader != nullptr);
  CHECK(leader->metrics().recoveries == 4);  // one per bucket, no double work
}
