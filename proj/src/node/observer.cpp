// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/node/observer.hpp"

#include <cstdio>

namespace bizur {

void LeaderObserver::on_leader_marked(InstanceId instance, ElectId elect_id,
                                      ServerId server) {
  marks_++;
  auto [it, inserted] = leaders_.try_emplace({instance, elect_id}, server);
  if (!inserted && it->second != server) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "instance=%llu elect_id=%llu claimed by server %u and %u",
                  static_cast<unsigned long long>(instance),
                  static_cast<unsigned long long>(elect_id),
                  it->second.value, server.value);
    violations_.emplace_back(buf);
  }
}

}  // namespace bizur
