#pragma once

// Locale-independent number formatting and minimal CSV helpers.

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "permsync/error.hpp"

namespace permsync {

/// Shortest representation that round-trips.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double x, int precision) {
  char buf[128];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, precision);
  if (res.ec != std::errc{}) return format_double(x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("bad number '" + std::string(s) + "'");
  return out;
}

inline long long parse_int(std::string_view s) {
  long long out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("bad integer '" + std::string(s) + "'");
  return out;
}

/// Non-empty lines, with a trailing '\r' stripped.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

/// Splits on commas; no quoting (none of our files need it).
inline std::vector<std::string_view> split_csv_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace permsync
