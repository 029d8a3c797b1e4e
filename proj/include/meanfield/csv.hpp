#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace meanfield::csv {

// 17 significant digits: round-trips every double. Negative zero prints as 0.
inline std::string num(double x) {
  if (x == 0.0) x = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void header(std::ostream& out, std::initializer_list<std::string_view> cols) {
  bool first = true;
  for (auto c : cols) {
    if (!first) out << ',';
    out << c;
    first = false;
  }
  out << '\n';
}

inline void row(std::ostream& out, std::initializer_list<double> vals) {
  bool first = true;
  for (double v : vals) {
    if (!first) out << ',';
    out << num(v);
    first = false;
  }
  out << '\n';
}

}  // namespace meanfield::csv
