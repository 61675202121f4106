// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_SIM_MATRIX_IO_HPP_
#define CHANEST_SIM_MATRIX_IO_HPP_

#include <filesystem>

#include "chanest/sim/channel.hpp"

namespace chanest::sim {

/// One row per entry: `row,col,re,im`, values printed round-trip exact.
void write_matrix_csv(const std::filesystem::path& path, const ComplexMatrix& m);

/// Inverse of write_matrix_csv. Every entry must appear exactly once.
ComplexMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace chanest::sim

#endif  // CHANEST_SIM_MATRIX_IO_HPP_
