// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "bizur/assert.hpp"

namespace bizur::harness {

using nlohmann::json;

// ---- config parsing -----------------------------------------------------------

namespace {

const std::set<std::string> kKnownKeys = {
    "name", "seed", "servers", "shards", "buckets_per_shard", "persist",
    "clients", "keys", "op_mix", "key_distribution", "zipf_s", "value_size",
    "duration_ms", "drop_rate", "latency_us", "detection_timeout_ms",
    "quorum_timeout_ms", "quorum_retransmit_ms", "client_retransmit_ms",
    "election_token_period_ms", "sweep_interval_ms", "iterate_batch",
    "fault", "chaos_rate", "chaos_delay_max_ms", "check", "trace", "faults",
    "sweep_keys", "sweep_drop"};

const std::set<std::string> kKnownFaultKeys = {
    "at_ms", "kind", "shard", "server", "recover_after_ms", "rate",
    "groups", "bucket", "extra_ms", "new_servers", "followers"};

bool parse_fault(const json& j, FaultEvent* out, std::string* error) {
  for (auto& [key, value] : j.items()) {
    (void)value;
    if (!kKnownFaultKeys.count(key)) {
      *error = "unknown fault field: " + key;
      return false;
    }
  }
  std::string kind = j.value("kind", "");
  FaultEvent f;
  if (kind == "crash_leader") f.kind = FaultEvent::Kind::CrashLeader;
  else if (kind == "crash") f.kind = FaultEvent::Kind::Crash;
  else if (kind == "set_drop_rate") f.kind = FaultEvent::Kind::SetDropRate;
  else if (kind == "partition") f.kind = FaultEvent::Kind::Partition;
  else if (kind == "heal") f.kind = FaultEvent::Kind::Heal;
  else if (kind == "delay_bucket") f.kind = FaultEvent::Kind::DelayBucket;
  else if (kind == "reconfig") f.kind = FaultEvent::Kind::Reconfig;
  else if (kind == "isolate_leader") f.kind = FaultEvent::Kind::IsolateLeader;
  else {
    *error = "fault kind unknown: '" + kind + "'";
    return false;
  }
  f.at = sim_ms(j.value("at_ms", 0ull));
  f.shard = j.value("shard", 0u);
  f.server = j.value("server", 0u);
  f.recover_after = sim_ms(j.value("recover_after_ms", 0ull));
  f.rate = j.value("rate", 0.0);
  f.bucket = j.value("bucket", 0u);
  f.extra_delay = sim_ms(j.value("extra_ms", 0ull));
  f.followers = j.value("followers", 1u);
  if (j.contains("groups"))
    f.groups = j["groups"].get<std::vector<std::vector<uint32_t>>>();
  if (j.contains("new_servers"))
    f.new_servers = j["new_servers"].get<std::vector<uint32_t>>();
  *out = f;
  return true;
}

}  // namespace

std::optional<ScenarioConfig> parse_scenario(const std::string& json_text,
                                             std::string* error) {
  std::string local_error;
  if (!error) error = &local_error;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    *error = std::string("json parse error: ") + e.what();
    return std::nullopt;
  }
  try {
    for (auto& [key, value] : j.items()) {
      (void)value;
      if (!kKnownKeys.count(key)) {
        *error = "unknown field: " + key;
        return std::nullopt;
      }
    }
    ScenarioConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.servers = j.value("servers", cfg.servers);
    cfg.shards = j.value("shards", cfg.shards);
    cfg.buckets_per_shard = j.value("buckets_per_shard", cfg.buckets_per_shard);
    cfg.persist = j.value("persist", cfg.persist);
    cfg.clients = j.value("clients", cfg.clients);
    cfg.keys = j.value("keys", cfg.keys);
    if (j.contains("op_mix")) {
      const json& m = j["op_mix"];
      cfg.mix.get = m.value("get", 0.0);
      cfg.mix.set = m.value("set", 0.0);
      cfg.mix.del = m.value("delete", 0.0);
      cfg.mix.cas = m.value("cas", 0.0);
      if (cfg.mix.get + cfg.mix.set + cfg.mix.del + cfg.mix.cas <= 0.0) {
        *error = "field op_mix: weights sum to zero";
        return std::nullopt;
      }
    }
    std::string dist = j.value("key_distribution", "uniform");
    if (dist == "uniform") cfg.dist = checker::KeyDist::Uniform;
    else if (dist == "zipf") cfg.dist = checker::KeyDist::Zipf;
    else {
      *error = "field key_distribution: expected uniform or zipf";
      return std::nullopt;
    }
    cfg.zipf_s = j.value("zipf_s", cfg.zipf_s);
    cfg.value_size = j.value("value_size", cfg.value_size);
    cfg.duration = sim_ms(j.value("duration_ms", 10000ull));
    cfg.drop_rate = j.value("drop_rate", cfg.drop_rate);
    if (cfg.drop_rate < 0.0 || cfg.drop_rate > 1.0) {
      *error = "field drop_rate: out of [0,1]";
      return std::nullopt;
    }
    if (j.contains("latency_us")) {
      cfg.latency_min = j["latency_us"].value("min", 500ull);
      cfg.latency_max = j["latency_us"].value("max", 2000ull);
      if (cfg.latency_min > cfg.latency_max) {
        *error = "field latency_us: min > max";
        return std::nullopt;
      }
    }
    cfg.detection_timeout = sim_ms(j.value("detection_timeout_ms", 100ull));
    cfg.quorum_timeout = sim_ms(j.value("quorum_timeout_ms", 50ull));
    cfg.quorum_retransmit = sim_ms(j.value("quorum_retransmit_ms", 15ull));
    cfg.client_retransmit = sim_ms(j.value("client_retransmit_ms", 20ull));
    cfg.election_token_period =
        sim_ms(j.value("election_token_period_ms", 500ull));
    cfg.sweep_interval = sim_ms(j.value("sweep_interval_ms", 5ull));
    cfg.iterate_batch = j.value("iterate_batch", 0u);
    std::string fault = j.value("fault", "none");
    if (fault == "none") cfg.fault = NodeFault::None;
    else if (fault == "skip_recovery_writeback")
      cfg.fault = NodeFault::SkipRecoveryWriteback;
    else {
      *error = "field fault: unknown variant '" + fault + "'";
      return std::nullopt;
    }
    cfg.chaos_rate = j.value("chaos_rate", 0.0);
    cfg.chaos_delay_max = sim_ms(j.value("chaos_delay_max_ms", 5ull));
    cfg.check = j.value("check", false);
    cfg.trace = j.value("trace", false);
    if (j.contains("sweep_keys"))
      cfg.sweep_keys = j["sweep_keys"].get<std::vector<uint32_t>>();
    if (j.contains("sweep_drop"))
      cfg.sweep_drop = j["sweep_drop"].get<std::vector<double>>();
    if (j.contains("faults")) {
      for (const json& jf : j["faults"]) {
        FaultEvent f;
        if (!parse_fault(jf, &f, error)) return std::nullopt;
        cfg.faults.push_back(std::move(f));
      }
    }
    if (cfg.servers < 1 || cfg.shards < 1 || cfg.buckets_per_shard < 1 ||
        cfg.clients < 1 || cfg.keys < 1) {
      *error = "servers, shards, buckets_per_shard, clients, keys must be >= 1";
      return std::nullopt;
    }
    return cfg;
  } catch (const json::exception& e) {
    *error = std::string("config error: ") + e.what();
    return std::nullopt;
  }
}

// ---- world ---------------------------------------------------------------------

World::World(sim::Simulation& sim, ScenarioConfig cfg)
    : sim_(sim), cfg_(std::move(cfg)), shard_map_(cfg_.shards) {
  for (uint32_t i = 0; i < cfg_.servers; ++i)
    server_hosts_.push_back(sim_.add_host());
  aux_host_ = sim_.add_host();
  controller_addr_ = sim_.new_endpoint(aux_host_);

  for (uint32_t s = 0; s < cfg_.shards; ++s) {
    ClusterOptions opt = instance_options(s);
    std::vector<sim::HostId> hosts = server_hosts_;
    instances_.push_back(
        std::make_unique<Cluster>(sim_, opt, &observer_, hosts));
    active_[s] = instances_.back().get();
    shard_map_.publish(active_[s]->descriptor());
  }

  RouterOptions ropt;
  ropt.request_timeout = cfg_.detection_timeout;
  ropt.retransmit_interval = cfg_.client_retransmit;
  ropt.election_token_period = cfg_.election_token_period;
  for (uint32_t c = 0; c < cfg_.clients; ++c) {
    ServerId addr = sim_.new_endpoint(aux_host_);
    clients_.push_back(std::make_unique<ClientActor>(
        sim_, addr, c, shard_map_.descriptors(), ropt));
    sim_.bind(addr, clients_.back().get());
  }

  ControllerCallbacks cbs;
  cbs.spawn_instance = [this](uint32_t shard,
                              const std::vector<sim::HostId>& hosts,
                              const InstanceDescriptor& old_desc) {
    ClusterOptions opt = instance_options(shard);
    opt.servers = static_cast<uint32_t>(hosts.size());
    opt.instance_id = next_instance_id_++;
    opt.start_in_reconfig = true;
    opt.copy_source = old_desc;
    opt.controller = controller_addr_;
    // The copy sweep must run even when the scenario disables the recovery
    // sweep, or the reconfig state would never end.
    if (opt.sweep_interval == 0) opt.sweep_interval = sim_ms(5);
    instances_.push_back(
        std::make_unique<Cluster>(sim_, opt, &observer_, hosts));
    old_[shard] = active_[shard];
    active_[shard] = instances_.back().get();
    reconfig_done_[shard] = false;
    return active_[shard]->descriptor();
  };
  cbs.retire_instance = [this](const InstanceDescriptor& old_desc) {
    auto it = old_.find(old_desc.shard);
    if (it != old_.end() && it->second) it->second->retire();
  };
  cbs.endpoint_alive = [this](ServerId s) { return sim_.endpoint_alive(s); };
  cbs.client_endpoints = [this]() {
    std::vector<ServerId> out;
    for (const auto& c : clients_) out.push_back(c->self());
    return out;
  };
  cbs.on_descriptor = [this](const InstanceDescriptor& d) {
    shard_map_.publish(d);
  };
  cbs.on_complete = [this](uint32_t shard) { reconfig_done_[shard] = true; };
  controller_ = std::make_unique<ReconfigController>(
      sim_, controller_addr_, cfg_.detection_timeout, std::move(cbs));
  sim_.bind(controller_addr_, controller_.get());
}

ClusterOptions World::instance_options(uint32_t shard) {
  ClusterOptions opt;
  opt.servers = cfg_.servers;
  opt.num_buckets = cfg_.buckets_per_shard;
  opt.persist = cfg_.persist;
  opt.quorum_timeout = cfg_.quorum_timeout;
  opt.quorum_retransmit = cfg_.quorum_retransmit;
  opt.sweep_interval = cfg_.sweep_interval;
  opt.iterate_batch = cfg_.iterate_batch;
  opt.fault = cfg_.fault;
  opt.instance_id = next_instance_id_++;
  opt.shard = shard;
  return opt;
}

Cluster& World::instance(uint32_t shard) {
  BIZUR_ASSERT(active_.count(shard), "unknown shard");
  return *active_[shard];
}

Cluster* World::old_instance(uint32_t shard) {
  auto it = old_.find(shard);
  return it == old_.end() ? nullptr : it->second;
}

sim::HostId World::server_host(uint32_t index) {
  while (index >= server_hosts_.size()) server_hosts_.push_back(sim_.add_host());
  return server_hosts_[index];
}

void World::start_workload(checker::History* history, SimTime stop_at) {
  checker::WorkloadParams params;
  params.clients = cfg_.clients;
  params.keys = cfg_.keys;
  params.mix = cfg_.mix;
  params.dist = cfg_.dist;
  params.zipf_s = cfg_.zipf_s;
  params.value_size = cfg_.value_size;
  auto scripts = checker::generate_workload(cfg_.seed, params);
  for (uint32_t c = 0; c < cfg_.clients; ++c)
    clients_[c]->start_workload(scripts[c], history, stop_at);
}

bool World::start_reconfig(uint32_t shard,
                           const std::vector<uint32_t>& host_indices) {
  std::vector<sim::HostId> hosts;
  for (uint32_t i : host_indices) hosts.push_back(server_host(i));
  return controller_->start_reconfig(shard, hosts,
                                     active_[shard]->descriptor());
}

bool World::reconfig_complete(uint32_t shard) const {
  auto it = reconfig_done_.find(shard);
  return it != reconfig_done_.end() && it->second;
}

void World::delay_bucket(uint32_t bucket, SimTime extra) {
  bucket_delays_[bucket] = extra;
  if (delay_filter_installed_) return;
  delay_filter_installed_ = true;
  sim_.set_delay_filter([this](const Envelope& env) -> SimTime {
    uint32_t index;
    if (const auto* w = std::get_if<ReplicaWrite>(&env.payload)) {
      index = w->bucket->index;
    } else if (const auto* r = std::get_if<ReplicaRead>(&env.payload)) {
      index = r->index;
    } else {
      return 0;
    }
    auto it = bucket_delays_.find(index);
    return it == bucket_delays_.end() ? 0 : it->second;
  });
}

void World::apply_fault(const FaultEvent& f) {
  switch (f.kind) {
    case FaultEvent::Kind::CrashLeader: {
      Cluster& cl = instance(f.shard);
      if (f.recover_after > 0)
        cl.crash_recover_leader(f.recover_after);
      else
        cl.crash_leader();
      return;
    }
    case FaultEvent::Kind::Crash: {
      Cluster& cl = instance(f.shard);
      if (f.server >= cl.size()) return;
      if (f.recover_after > 0)
        cl.crash_recover(f.server, f.recover_after);
      else
        cl.crash(f.server);
      return;
    }
    case FaultEvent::Kind::SetDropRate:
      sim_.set_drop_rate(f.rate);
      return;
    case FaultEvent::Kind::Partition: {
      std::vector<std::vector<sim::HostId>> groups;
      for (const auto& g : f.groups) {
        std::vector<sim::HostId> hosts;
        for (uint32_t i : g) hosts.push_back(server_host(i));
        groups.push_back(std::move(hosts));
      }
      sim_.partition(groups);
      return;
    }
    case FaultEvent::Kind::Heal:
      sim_.heal();
      return;
    case FaultEvent::Kind::DelayBucket:
      delay_bucket(f.bucket, f.extra_delay);
      return;
    case FaultEvent::Kind::Reconfig:
      start_reconfig(f.shard, f.new_servers);
      return;
    case FaultEvent::Kind::IsolateLeader: {
      Cluster& cl = instance(f.shard);
      auto li = cl.leader_index();
      if (!li) return;
      std::vector<sim::HostId> isolated = {cl.host(*li)};
      for (size_t i = 1; i < cl.size() && isolated.size() < 1 + f.followers;
           ++i) {
        size_t idx = (*li + i) % cl.size();
        if (sim_.host_alive(cl.host(idx))) isolated.push_back(cl.host(idx));
      }
      std::vector<sim::HostId> rest;
      for (size_t i = 0; i < cl.size(); ++i) {
        bool in = false;
        for (auto h : isolated) in |= (h == cl.host(i));
        if (!in) rest.push_back(cl.host(i));
      }
      sim_.partition({isolated, rest});
      return;
    }
  }
}

void World::schedule_faults() {
  for (const FaultEvent& f : cfg_.faults) {
    sim_.schedule(f.at, "fault", [this, f]() { apply_fault(f); });
  }
}

// ---- metrics --------------------------------------------------------------------

namespace {
bool acked_outcome(const checker::Outcome& o) {
  using K = checker::Outcome::Kind;
  return o.kind == K::Value || o.kind == K::Absent || o.kind == K::Ok ||
         o.kind == K::CasMismatch;
}
}  // namespace

std::vector<SecondRow> per_second_rows(const checker::History& history,
                                       SimTime duration) {
  size_t seconds = static_cast<size_t>(duration / sim_sec(1));
  std::vector<std::vector<uint64_t>> lat(seconds);
  for (const auto& op : history.ops()) {
    if (!op.responded() || !acked_outcome(*op.outcome)) continue;
    SimTime t = *op.respond_time;
    size_t s = static_cast<size_t>(t / sim_sec(1));
    if (s >= seconds) continue;
    lat[s].push_back(*op.respond_time - op.invoke_time);
  }
  std::vector<SecondRow> rows(seconds);
  for (size_t s = 0; s < seconds; ++s) {
    auto& v = lat[s];
    rows[s].ops = v.size();
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    uint64_t sum = 0;
    for (uint64_t x : v) sum += x;
    rows[s].mean_ms = static_cast<double>(sum) / v.size() / 1000.0;
    size_t idx = (v.size() * 99 + 99) / 100;  // ceil(0.99 n)
    if (idx > v.size()) idx = v.size();
    rows[s].p99_ms = static_cast<double>(v[idx - 1]) / 1000.0;
  }
  return rows;
}

std::string metrics_csv(const checker::History& history, SimTime duration) {
  auto rows = per_second_rows(history, duration);
  std::string out = "t_sec,ops_completed,latency_mean_ms,latency_p99_ms\n";
  char buf[96];
  for (size_t s = 0; s < rows.size(); ++s) {
    std::snprintf(buf, sizeof(buf), "%zu,%llu,%.3f,%.3f\n", s,
                  static_cast<unsigned long long>(rows[s].ops),
                  rows[s].mean_ms, rows[s].p99_ms);
    out += buf;
  }
  return out;
}

// ---- runner ---------------------------------------------------------------------

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  sim::SimConfig scfg;
  scfg.seed = cfg.seed;
  scfg.latency_min = cfg.latency_min;
  scfg.latency_max = cfg.latency_max;
  scfg.drop_rate = cfg.drop_rate;
  scfg.detection_timeout = cfg.detection_timeout;
  scfg.chaos_rate = cfg.chaos_rate;
  scfg.chaos_delay_max = cfg.chaos_delay_max;

  sim::Simulation sim(scfg);
  ScenarioResult result;
  if (cfg.trace) sim.set_trace_sink(&result.trace);

  World world(sim, cfg);
  world.schedule_faults();
  world.start_workload(&result.history, cfg.duration);

  // Grace window so in-flight operations resolve into the history; they
  // matter to the checker even when they fall outside the metric window.
  sim.run_until(cfg.duration + 3 * cfg.detection_timeout);

  result.csv = metrics_csv(result.history, cfg.duration);
  result.per_second = per_second_rows(result.history, cfg.duration);
  result.invoked = result.history.ops().size();
  result.acked = result.history.acked_count();
  result.leader_marks = world.observer().marks();
  result.observer_violations = world.observer().violations();

  std::vector<uint64_t> lat;
  for (const auto& op : result.history.ops()) {
    if (!op.responded() || !acked_outcome(*op.outcome)) continue;
    lat.push_back(*op.respond_time - op.invoke_time);
  }
  if (!lat.empty()) {
    std::sort(lat.begin(), lat.end());
    uint64_t sum = 0;
    for (uint64_t x : lat) sum += x;
    result.latency_mean_ms = static_cast<double>(sum) / lat.size() / 1000.0;
    size_t idx = (lat.size() * 99 + 99) / 100;
    if (idx > lat.size()) idx = lat.size();
    result.latency_p99_ms = static_cast<double>(lat[idx - 1]) / 1000.0;
  }
  result.throughput_ops =
      static_cast<double>(result.acked) /
      (static_cast<double>(cfg.duration) / static_cast<double>(sim_sec(1)));

  if (cfg.check) {
    result.verdict = checker::check(result.history);
  }

  if (!result.observer_violations.empty())
    result.exit_code = 2;
  else if (result.verdict &&
           result.verdict->kind == checker::Verdict::Kind::Violation)
    result.exit_code = 3;
  else if (result.verdict &&
           result.verdict->kind ==
               checker::Verdict::Kind::SearchBudgetExceeded)
    result.exit_code = 4;
  return result;
}

}  // namespace bizur::harness
