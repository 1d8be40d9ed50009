// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/sim/simulation.hpp"

#include <algorithm>
#include <cstdio>

#include "bizur/assert.hpp"

namespace bizur::sim {

Simulation::Simulation(SimConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
  BIZUR_ASSERT(cfg_.latency_min <= cfg_.latency_max, "latency min > max");
  BIZUR_ASSERT(cfg_.drop_rate >= 0.0 && cfg_.drop_rate <= 1.0,
               "drop_rate out of range");
}

HostId Simulation::add_host() {
  hosts_.push_back(HostRec{});
  return HostId{next_host_++};
}

ServerId Simulation::new_endpoint(HostId host) {
  BIZUR_ASSERT(host.value < hosts_.size(), "unknown host");
  ServerId id{next_endpoint_++};
  endpoints_[id.value] = EndpointRec{nullptr, host};
  return id;
}

void Simulation::bind(ServerId endpoint, Actor* actor) {
  auto it = endpoints_.find(endpoint.value);
  BIZUR_ASSERT(it != endpoints_.end(), "bind of unknown endpoint");
  it->second.actor = actor;
}

ServerId Simulation::spawn(HostId host, Actor* actor) {
  ServerId id = new_endpoint(host);
  bind(id, actor);
  return id;
}

void Simulation::unbind(ServerId endpoint) { endpoints_.erase(endpoint.value); }

bool Simulation::bound(ServerId endpoint) const {
  auto it = endpoints_.find(endpoint.value);
  return it != endpoints_.end() && it->second.actor != nullptr;
}

bool Simulation::host_alive(HostId host) const {
  return host.value < hosts_.size() && hosts_[host.value].alive;
}

bool Simulation::endpoint_alive(ServerId endpoint) const {
  auto it = endpoints_.find(endpoint.value);
  if (it == endpoints_.end() || it->second.actor == nullptr) return false;
  return hosts_[it->second.host.value].alive;
}

HostId Simulation::host_of(ServerId endpoint) const {
  auto it = endpoints_.find(endpoint.value);
  BIZUR_ASSERT(it != endpoints_.end(), "host_of unknown endpoint");
  return it->second.host;
}

void Simulation::push(SimTime at, std::function<void()> fn) {
  queue_.push(Event{at, ++event_seq_, std::move(fn)});
}

bool Simulation::blocked(HostId a, HostId b) const {
  auto key = std::minmax(a.value, b.value);
  return blocked_.count({key.first, key.second}) != 0;
}

void Simulation::trace_line(const char* what, const Envelope& env,
                            SimTime when) {
  if (!trace_) return;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "t=%llu %s from=%u to=%u msg=%llu payload=%s\n",
                static_cast<unsigned long long>(when), what, env.from.value,
                env.to.value, static_cast<unsigned long long>(env.msg_id),
                payload_tag(env.payload));
  trace_->append(buf);
}

void Simulation::send(Envelope env) {
  const std::string tag = payload_tag(env.payload);
  stats_[tag].sent++;
  bool self = env.from == env.to;
  if (!self) {
    auto from_it = endpoints_.find(env.from.value);
    auto to_it = endpoints_.find(env.to.value);
    // A message to a retired endpoint dies silently, like a datagram to a
    // closed port.
    if (from_it != endpoints_.end() && to_it != endpoints_.end()) {
      if (blocked(from_it->second.host, to_it->second.host)) {
        stats_[tag].dropped++;
        trace_line("drop", env, clock_);
        return;
      }
    }
    if (rng_.chance(cfg_.drop_rate)) {
      stats_[tag].dropped++;
      trace_line("drop", env, clock_);
      return;
    }
  }
  SimTime delay = rng_.uniform(cfg_.latency_min, cfg_.latency_max);
  if (delay_filter_) delay += delay_filter_(env);
  trace_line("send", env, clock_);
  push(clock_ + delay, [this, env = std::move(env)]() { deliver(env); });
}

void Simulation::deliver(Envelope env) {
  const std::string tag = payload_tag(env.payload);
  auto it = endpoints_.find(env.to.value);
  if (it == endpoints_.end() || it->second.actor == nullptr ||
      !hosts_[it->second.host.value].alive) {
    stats_[tag].dead_dropped++;
    trace_line("dead", env, clock_);
    return;
  }
  stats_[tag].delivered++;
  trace_line("deliver", env, clock_);
  it->second.actor->on_envelope(std::move(env));
}

TimerHandle Simulation::set_timer(ServerId owner, SimTime delay,
                                  std::function<void()> fn) {
  uint64_t id = ++timer_seq_;
  auto host = host_of(owner);
  timers_[id] = TimerRec{owner, hosts_[host.value].generation};
  push(clock_ + delay, [this, id, fn = std::move(fn)]() {
    auto it = timers_.find(id);
    if (it == timers_.end()) return;  // cancelled
    auto ep = endpoints_.find(it->second.owner.value);
    if (ep == endpoints_.end() || ep->second.actor == nullptr) {
      timers_.erase(it);
      return;
    }
    const HostRec& host = hosts_[ep->second.host.value];
    bool stale = !host.alive || host.generation != it->second.host_generation;
    timers_.erase(it);
    if (!stale) fn();
  });
  return TimerHandle{id};
}

void Simulation::cancel_timer(TimerHandle h) {
  if (h.valid()) timers_.erase(h.id);
}

void Simulation::chaos_point(const char* point, ServerId owner,
                             std::function<void()> fn) {
  if (cfg_.chaos_rate > 0.0 && rng_.chance(cfg_.chaos_rate)) {
    SimTime delay = rng_.uniform(0, cfg_.chaos_delay_max);
    if (trace_) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "t=%llu chaos point=%s delay=%llu\n",
                    static_cast<unsigned long long>(clock_), point,
                    static_cast<unsigned long long>(delay));
      trace_->append(buf);
    }
    set_timer(owner, delay, std::move(fn));
    return;
  }
  fn();
}

void Simulation::schedule(SimTime delay, const char* tag,
                          std::function<void()> fn) {
  if (trace_) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "t=%llu schedule tag=%s at=%llu\n",
                  static_cast<unsigned long long>(clock_), tag,
                  static_cast<unsigned long long>(clock_ + delay));
    trace_->append(buf);
  }
  push(clock_ + delay, std::move(fn));
}

bool Simulation::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  BIZUR_ASSERT(ev.at >= clock_, "event scheduled in the past");
  clock_ = ev.at;
  ev.run();
  return true;
}

void Simulation::run_until(SimTime t) {
  while (!queue_.empty() && queue_.top().at <= t) step();
  clock_ = std::max(clock_, t);
}

std::optional<size_t> Simulation::run_to_quiescence(size_t max_events) {
  size_t n = 0;
  while (!queue_.empty()) {
    if (n >= max_events) return std::nullopt;
    step();
    ++n;
  }
  return n;
}

void Simulation::crash(HostId host) {
  BIZUR_ASSERT(host.value < hosts_.size(), "unknown host");
  HostRec& rec = hosts_[host.value];
  if (!rec.alive) return;  // crashing a crashed host is a no-op
  rec.alive = false;
  rec.generation++;
  if (trace_) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "t=%llu crash host=%u\n",
                  static_cast<unsigned long long>(clock_), host.value);
    trace_->append(buf);
  }
}

void Simulation::crash_recover(HostId host, SimTime delay,
                               std::function<void()> on_restart) {
  crash(host);
  push(clock_ + delay, [this, host, on_restart = std::move(on_restart)]() {
    hosts_[host.value].alive = true;
    if (trace_) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "t=%llu restart host=%u\n",
                    static_cast<unsigned long long>(clock_), host.value);
      trace_->append(buf);
    }
    if (on_restart) on_restart();
  });
}

void Simulation::set_drop_rate(double rate) {
  BIZUR_ASSERT(rate >= 0.0 && rate <= 1.0, "drop_rate out of range");
  cfg_.drop_rate = rate;
}

void Simulation::partition(const std::vector<std::vector<HostId>>& groups) {
  for (size_t i = 0; i < groups.size(); ++i)
    for (size_t j = i + 1; j < groups.size(); ++j)
      for (HostId a : groups[i])
        for (HostId b : groups[j]) block(a, b);
}

void Simulation::block(HostId a, HostId b) {
  auto key = std::minmax(a.value, b.value);
  blocked_.insert({key.first, key.second});
}

void Simulation::heal() { blocked_.clear(); }

void Simulation::set_delay_filter(std::function<SimTime(const Envelope&)> f) {
  delay_filter_ = std::move(f);
}

void Simulation::set_chaos(double rate, SimTime delay_max) {
  cfg_.chaos_rate = rate;
  cfg_.chaos_delay_max = delay_max;
}

uint64_t Simulation::delivered(const std::string& tag) const {
  auto it = stats_.find(tag);
  return it == stats_.end() ? 0 : it->second.delivered;
}

}  // namespace bizur::sim
