#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

namespace tubewalk::csv {

/// 17 significant digits, '.' separator, "inf"/"-inf"/"nan" for non-finite.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC 4180 quoting for fields containing separators, quotes or newlines.
inline std::string field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace tubewalk::csv
