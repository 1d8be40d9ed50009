// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <cstdio>
#include <cstdlib>

// Protocol invariants stay checked in optimized builds; a silent corruption
// in a consensus simulation is worse than the cycles spent checking.
#define BIZUR_ASSERT(cond, msg)                                             \
  do {                                                                      \
    if (!(cond)) {                                                          \
      std::fprintf(stderr, "assertion failed: %s (%s) at %s:%d\n", (msg),   \
                   #cond, __FILE__, __LINE__);                              \
      std::abort();                                                         \
    }                                                                       \
  } while (0)
