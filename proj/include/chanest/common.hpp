// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_COMMON_HPP_
#define CHANEST_COMMON_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanest {

// All randomness flows through explicitly seeded 64-bit Mersenne twisters.
using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and a list of tags.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq s(words.begin(), words.end());
  return Rng(s);
}

/// Splits a child stream off a parent generator (advances the parent).
inline Rng split_rng(Rng& parent, std::uint64_t tag = 0) {
  const std::uint64_t a = parent();
  return make_rng(a, {tag});
}

/// Uniform double in [0,1) from the top 53 bits; portable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear system that must be solved is singular.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value during training or estimation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written or parsed; the message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chanest

#endif  // CHANEST_COMMON_HPP_
