// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "chanest/ad/kernels.hpp"
#include "chanest/common.hpp"

namespace chanest {

void configure_allocator() {
#if defined(__GLIBC__)
  // Activations of the full-size network are a few MB each; above the default
  // mmap threshold every step would map and fault them in afresh.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

int configure_threads_from_env() {
  const char* env = std::getenv("CHANEST_THREADS");
  if (env && *env) {
    int n = 0;
    const char* end = env + std::strlen(env);
    const auto res = std::from_chars(env, end, n);
    if (res.ec != std::errc() || res.ptr != end || n < 1) {
      throw ValueError(std::string("CHANEST_THREADS must be a positive integer, got '") + env + "'");
    }
    kernels::set_max_threads(n);
  }
  return kernels::max_threads();
}

}  // namespace chanest
