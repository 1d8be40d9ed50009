// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <vector>

#include "bizur/node/node.hpp"
#include "bizur/sim/transport.hpp"

namespace bizur::test {

// Hand-driven transport: sends land in an outbox, timers fire on demand.
class FakeTransport : public sim::Transport {
 public:
  SimTime now() const override { return now_; }
  uint64_t next_msg_id() override { return ++msg_seq_; }
  uint64_t rand64() override { return rand_state_ = rand_state_ * 6364136223846793005ull + 1442695040888963407ull; }
  void send(Envelope env) override { outbox.push_back(std::move(env)); }

  sim::TimerHandle set_timer(ServerId owner, SimTime delay,
                             std::function<void()> fn) override {
    timers.push_back(Timer{++timer_seq_, owner, now_ + delay, std::move(fn)});
    return sim::TimerHandle{timer_seq_};
  }
  void cancel_timer(sim::TimerHandle h) override {
    timers.erase(std::remove_if(timers.begin(), timers.end(),
                                [&](const Timer& t) { return t.id == h.id; }),
                 timers.end());
  }

  std::vector<Envelope> take_outbox() {
    auto out = std::move(outbox);
    outbox.clear();
    return out;
  }

  // Fires the earliest-deadline timer, if any.
  bool fire_next_timer() {
    if (timers.empty()) return false;
    auto it = std::min_element(timers.begin(), timers.end(),
                               [](const Timer& a, const Timer& b) {
                                 if (a.deadline != b.deadline)
                                   return a.deadline < b.deadline;
                                 return a.id < b.id;
                               });
    Timer t = std::move(*it);
    timers.erase(it);
    now_ = std::max(now_, t.deadline);
    t.fn();
    return true;
  }

  // Fires timers until none remain (bounded).
  void drain_timers(int max_fires = 200) {
    for (int i = 0; i < max_fires && fire_next_timer(); ++i) {
    }
  }

  struct Timer {
    uint64_t id;
    ServerId owner;
    SimTime deadline;
    std::function<void()> fn;
  };

  std::vector<Envelope> outbox;
  std::vector<Timer> timers;
  SimTime now_ = 0;
  uint64_t msg_seq_ = 0;
  uint64_t timer_seq_ = 0;
  uint64_t rand_state_ = 0x853c49e6748fea9bull;
};

// A few nodes wired to one FakeTransport with manual message delivery.
class MiniCluster {
 public:
  MiniCluster(uint32_t servers, uint32_t num_buckets = 4,
              NodeFault fault = NodeFault::None) {
    std::vector<ServerId> members;
    for (uint32_t i = 0; i < servers; ++i) members.push_back(ServerId{i + 1});
    for (uint32_t i = 0; i < servers; ++i) {
      NodeConfig cfg;
      cfg.self = members[i];
      cfg.members = members;
      cfg.num_buckets = num_buckets;
      cfg.sweep_interval = 0;  // tests drive recovery explicitly
      cfg.quorum_retransmit = 0;
      cfg.fault = fault;
      nodes.push_back(
          std::make_unique<NodeInstance>(t, cfg, nullptr, &observer));
    }
  }

  NodeInstance& node(uint32_t i) { return *nodes[i]; }
  NodeInstance* by_id(ServerId id) {
    for (auto& n : nodes)
      if (n->self() == id) return n.get();
    return nullptr;
  }

  void deliver(const Envelope& env) {
    if (NodeInstance* n = by_id(env.to)) n->on_envelope(env);
  }

  // Delivers every outstanding envelope (and the replies they cause).
  void deliver_all(int max_rounds = 64) {
    for (int r = 0; r < max_rounds; ++r) {
      auto msgs = t.take_outbox();
      if (msgs.empty()) return;
      for (auto& env : msgs) deliver(env);
    }
  }

  FakeTransport t;
  LeaderObserver observer;
  std::vector<std::unique_ptr<NodeInstance>> nodes;
};

}  // namespace bizur::test
