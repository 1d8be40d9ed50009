// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <functional>

#include "bizur/envelope.hpp"
#include "bizur/types.hpp"

namespace bizur::sim {

struct TimerHandle {
  uint64_t id = 0;
  bool valid() const { return id != 0; }
};

// What a node or client needs from the network: the simulation implements
// this; unit tests substitute a hand-driven fake.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual SimTime now() const = 0;
  virtual uint64_t next_msg_id() = 0;
  virtual void send(Envelope env) = 0;
  // Deterministic random stream (the simulation's seeded RNG).
  virtual uint64_t rand64() = 0;

  // Timer owned by an endpoint: it never fires after the owner's host
  // crashed or restarted (stale fires are suppressed by generation).
  virtual TimerHandle set_timer(ServerId owner, SimTime delay,
                                std::function<void()> fn) = 0;
  virtual void cancel_timer(TimerHandle h) = 0;

  // Named yield point for race exploration. Runs `fn` inline in normal
  // operation; a chaos-enabled simulation may instead reschedule it after a
  // seeded delay, letting other pending events interleave.
  virtual void chaos_point(const char* point, ServerId owner,
                           std::function<void()> fn) {
    (void)point;
    (void)owner;
    fn();
  }
};

}  // namespace bizur::sim
