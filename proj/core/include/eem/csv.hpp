#pragma once

// Minimal CSV writing shared by the exporters: 17 significant digits,
// scientific notation, mandatory header row.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace eem::csv {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline void write_header(std::ostream& os, const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) os << ',';
    os << columns[i];
  }
  os << '\n';
}

/// Writes `,value`.
inline void write_field(std::ostream& os, double v) { os << ',' << format_double(v); }

}  // namespace eem::csv
