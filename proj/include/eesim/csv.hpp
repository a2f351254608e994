// SPDX-License-Identifier: Apache-2.0
//
// Byte-stable CSV formatting. %.17g round-trips doubles exactly, which the
// determinism contract relies on.

#pragma once

#include <cstdio>
#include <string>

namespace eesim::csv {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(unsigned long long v) { return std::to_string(v); }

struct Row {
  std::string line;

  template <typename T>
  void add(const T& v) {
    if (!line.empty()) line += ',';
    line += fmt(v);
  }

  void add(const std::string& s) {
    if (!line.empty()) line += ',';
    line += s;
  }

  const std::string& str() const { return line; }
};

}  // namespace eesim::csv
