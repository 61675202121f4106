// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_RUNTIME_HPP_
#define CHANEST_RUNTIME_HPP_

namespace chanest {

/// Keeps freed training buffers in the heap instead of returning them to the
/// OS after every step. No-op outside glibc. Call once from main.
void configure_allocator();

/// Applies CHANEST_THREADS (a positive integer) as the worker cap. Returns
/// the cap in effect; throws ValueError on a malformed value.
int configure_threads_from_env();

}  // namespace chanest

#endif  // CHANEST_RUNTIME_HPP_
