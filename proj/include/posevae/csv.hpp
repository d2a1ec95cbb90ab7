/// @file
/// Minimal CSV helpers. Files start with a `#version=1` line followed by a
/// header row; numbers use the shortest decimal form that round-trips.
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "posevae/errors.hpp"

namespace posevae::csv {

inline constexpr std::string_view kVersionLine = "#version=1";

inline std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Int>
  requires std::is_integral_v<Int>
std::string format(Int v) {
  return std::to_string(v);
}

/// Opens `path` for writing and emits the version line and header.
inline std::ofstream open_writer(const std::filesystem::path& path, std::string_view header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << kVersionLine << '\n' << header << '\n';
  return out;
}

struct Table {
  std::vector<std::string> header;
  /// Each row keeps its 1-based line number for diagnostics.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  /// Column index by name; throws DataError if absent.
  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("missing CSV column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool versioned = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(kVersionLine, 0) == 0) versioned = true;
      continue;
    }
    auto fields = split(line);
    if (t.header.empty()) {
      if (!versioned) throw DataError("CSV file lacks a #version=1 line", lineno);
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError("expected " + std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(fields.size()),
                      lineno);
    }
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (t.header.empty()) throw DataError("CSV file '" + path.string() + "' has no header");
  return t;
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw DataError("not a number: '" + std::string(s) + "'", line);
  }
  return v;
}

inline long long parse_int(std::string_view s, std::size_t line) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("not an integer: '" + std::string(s) + "'", line);
  }
  return v;
}

}  // namespace posevae::csv
