#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "distsurf/error.hpp"
#include "distsurf/events.hpp"

namespace distsurf {

namespace text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace text

/// Parses header-less `t_us,x,y,p` rows. Polarity 0 is read as -1. Rows out of
/// time order are stably sorted.
inline EventStream read_events(std::istream& in, const SensorGeometry& geometry) {
  EventStream stream;
  stream.geometry = geometry;
  std::string line;
  std::size_t lineno = 0;
  bool sorted = true;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = text::trim(line);
    if (row.empty()) continue;
    auto fields = text::split(row, ',');
    if (fields.size() != 4) throw ParseError("expected 4 fields t_us,x,y,p", lineno);
    Event e;
    int p = 0;
    if (!text::parse_number(fields[0], e.t) || !text::parse_number(fields[1], e.x) ||
        !text::parse_number(fields[2], e.y) || !text::parse_number(fields[3], p))
      throw ParseError("malformed number", lineno);
    if (e.t < 0) throw ParseError("negative timestamp", lineno);
    if (p != -1 && p != 0 && p != 1) throw ParseError("polarity must be -1, 0 or 1", lineno);
    e.p = static_cast<std::int8_t>(p == 0 ? -1 : p);
    if (!geometry.contains(e.x, e.y))
      throw ParseError("pixel (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                           ") outside " + std::to_string(geometry.width) + "x" +
                           std::to_string(geometry.height) + " sensor",
                       lineno);
    if (!stream.events.empty() && e.t < stream.events.back().t) sorted = false;
    stream.events.push_back(e);
  }
  if (stream.events.empty()) throw InputError("event file contains no events");
  if (!sorted)
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

inline EventStream parse_events(const std::string& path, const SensorGeometry& geometry) {
  auto in = text::open_input(path);
  try {
    return read_events(in, geometry);
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_events(std::ostream& out, const EventStream& stream) {
  std::string buf;
  for (const Event& e : stream.events) {
    buf.clear();
    buf += std::to_string(e.t);
    buf += ',';
    buf += std::to_string(e.x);
    buf += ',';
    buf += std::to_string(e.y);
    buf += ',';
    buf += e.p < 0 ? "-1" : "1";
    buf += '\n';
    out << buf;
  }
}

inline void write_events(const std::string& path, const EventStream& stream) {
  auto out = text::open_output(path);
  write_events(out, stream);
}

/// Flat `key=value` text, one pair per line; `#` starts a comment.
inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = text::trim(line);
    if (row.empty() || row.front() == '#') continue;
    auto eq = row.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
    kv[std::string(text::trim(row.substr(0, eq)))] = std::string(text::trim(row.substr(eq + 1)));
  }
  return kv;
}

inline SensorGeometry read_geometry(std::istream& in) {
  auto kv = read_key_values(in);
  SensorGeometry g;
  auto get = [&](const char* key, auto& out) {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError(std::string("geometry is missing '") + key + "'");
    if (!text::parse_number(it->second, out))
      throw InputError(std::string("geometry value for '") + key + "' is not a number");
  };
  get("width", g.width);
  get("height", g.height);
  get("fx", g.fx);
  get("fy", g.fy);
  get("cx", g.cx);
  get("cy", g.cy);
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return g;
}

inline SensorGeometry read_geometry(const std::string& path) {
  auto in = text::open_input(path);
  try {
    return read_geometry(in);
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_geometry(std::ostream& out, const SensorGeometry& g) {
  out << "width=" << g.width << '\n'
      << "height=" << g.height << '\n'
      << "fx=" << text::format_double(g.fx) << '\n'
      << "fy=" << text::format_double(g.fy) << '\n'
      << "cx=" << text::format_double(g.cx) << '\n'
      << "cy=" << text::format_double(g.cy) << '\n';
}

inline void write_geometry(const std::string& path, const SensorGeometry& g) {
  auto out = text::open_output(path);
  write_geometry(out, g);
}

}  // namespace distsurf
