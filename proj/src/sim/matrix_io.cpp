// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/sim/matrix_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace chanest::sim {

void write_matrix_csv(const std::filesystem::path& path, const ComplexMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "row,col,re,im\n";
  char buf[96];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g\n", static_cast<long>(r), static_cast<long>(c),
                    m(r, c).real(), m(r, c).imag());
      out << buf;
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ComplexMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "row,col,re,im") {
    throw IoError(path.string() + ": expected header row,col,re,im");
  }
  struct Entry {
    long r, c;
    double re, im;
  };
  std::vector<Entry> entries;
  long max_r = -1, max_c = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Entry e{};
    char tail = 0;
    if (std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf%c", &e.r, &e.c, &e.re, &e.im, &tail) != 4 || e.r < 0 ||
        e.c < 0) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed entry");
    }
    max_r = std::max(max_r, e.r);
    max_c = std::max(max_c, e.c);
    entries.push_back(e);
  }
  if (entries.empty()) throw IoError(path.string() + ": no entries");
  const auto rows = max_r + 1, cols = max_c + 1;
  if (static_cast<std::size_t>(rows * cols) != entries.size()) {
    throw IoError(path.string() + ": entries do not cover a " + std::to_string(rows) + "x" + std::to_string(cols) +
                  " matrix");
  }
  ComplexMatrix m(rows, cols);
  std::vector<bool> seen(entries.size(), false);
  for (const auto& e : entries) {
    const auto k = static_cast<std::size_t>(e.r * cols + e.c);
    if (seen[k]) throw IoError(path.string() + ": duplicate entry (" + std::to_string(e.r) + "," + std::to_string(e.c) + ")");
    seen[k] = true;
    m(e.r, e.c) = {e.re, e.im};
  }
  return m;
}

}  // namespace chanest::sim
