#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "distsurf/error.hpp"
#include "distsurf/event_io.hpp"
#include "distsurf/flow_solver.hpp"
#include "distsurf/grid.hpp"

namespace distsurf {

namespace binary {

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InputError("truncated binary file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace binary

inline constexpr const char* kFlowCsvHeader = "t_us,x,y,u_pps,v_pps";

inline void write_event_flow(std::ostream& out, const EventFlow& flow, bool header = true) {
  if (header) out << kFlowCsvHeader << '\n';
  for (const FlowEntry& e : flow.entries)
    out << e.t << ',' << e.x << ',' << e.y << ',' << text::format_double(e.u) << ','
        << text::format_double(e.v) << '\n';
}

inline void write_event_flow(const std::string& path, const EventFlow& flow) {
  auto out = text::open_output(path);
  write_event_flow(out, flow);
}

/// Reads `t_us,x,y,u_pps,v_pps` rows; a leading header row is optional.
inline EventFlow read_event_flow(std::istream& in) {
  EventFlow flow;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = text::trim(line);
    if (row.empty()) continue;
    if (lineno == 1 && row.rfind("t_us", 0) == 0) continue;
    auto f = text::split(row, ',');
    FlowEntry e;
    if (f.size() != 5 || !text::parse_number(f[0], e.t) || !text::parse_number(f[1], e.x) ||
        !text::parse_number(f[2], e.y) || !text::parse_number(f[3], e.u) ||
        !text::parse_number(f[4], e.v))
      throw ParseError("expected t_us,x,y,u_pps,v_pps", lineno);
    flow.entries.push_back(e);
  }
  return flow;
}

inline EventFlow read_event_flow(const std::string& path) {
  auto in = text::open_input(path);
  try {
    return read_event_flow(in);
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

/// Middlebury two-band flow: "PIEH", int32 width, int32 height, then
/// interleaved float32 (u, v) in row-major order, all little-endian.
inline void write_flo(std::ostream& out, const Grid<double>& u, const Grid<double>& v) {
  out.write("PIEH", 4);
  binary::put_le<std::int32_t>(out, u.width());
  binary::put_le<std::int32_t>(out, u.height());
  for (std::size_t i = 0; i < u.size(); ++i) {
    binary::put_le<float>(out, static_cast<float>(u[i]));
    binary::put_le<float>(out, static_cast<float>(v[i]));
  }
}

inline void write_flo(const std::string& path, const FlowField& flow) {
  auto out = text::open_output(path);
  write_flo(out, flow.u, flow.v);
}

inline FlowField read_flo(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PIEH", 4) != 0)
    throw InputError("not a .flo file (bad magic)");
  const auto w = binary::get_le<std::int32_t>(in);
  const auto h = binary::get_le<std::int32_t>(in);
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) throw InputError("bad .flo dimensions");
  FlowField f;
  f.u = Grid<double>(w, h, 0.0);
  f.v = Grid<double>(w, h, 0.0);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = binary::get_le<float>(in);
    f.v[i] = binary::get_le<float>(in);
  }
  return f;
}

inline FlowField read_flo(const std::string& path) {
  auto in = text::open_input(path);
  return read_flo(in);
}

/// Debug grid dump: "DSG1", uint32 width, uint32 height, float64 values,
/// row-major, little-endian.
inline void write_grid(std::ostream& out, const Grid<double>& g) {
  out.write("DSG1", 4);
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.width()));
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.height()));
  for (double v : g) binary::put_le<double>(out, v);
}

inline Grid<double> read_grid(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DSG1", 4) != 0)
    throw InputError("not a grid dump (bad magic)");
  const auto w = binary::get_le<std::uint32_t>(in);
  const auto h = binary::get_le<std::uint32_t>(in);
  Grid<double> g(static_cast<int>(w), static_cast<int>(h), 0.0);
  for (double& v : g) v = binary::get_le<double>(in);
  return g;
}

/// 16-bit binary PGM with values scaled so the maximum maps to 65535.
inline void write_pgm16(std::ostream& out, const Grid<double>& g) {
  double peak = 0.0;
  for (double v : g) peak = std::max(peak, v);
  out << "P5\n" << g.width() << ' ' << g.height() << "\n65535\n";
  for (double v : g) {
    const auto q = static_cast<std::uint16_t>(
        peak > 0.0 ? std::lround(std::clamp(v / peak, 0.0, 1.0) * 65535.0) : 0);
    const unsigned char be[2] = {static_cast<unsigned char>(q >> 8),
                                 static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(be), 2);
  }
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline void write_ppm(std::ostream& out, const Grid<Rgb>& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (const Rgb& c : img) {
    const char px[3] = {static_cast<char>(c.r), static_cast<char>(c.g), static_cast<char>(c.b)};
    out.write(px, 3);
  }
}

inline Grid<Rgb> read_ppm(std::istream& in) {
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw InputError("unsupported PPM");
  Grid<Rgb> img(w, h);
  for (Rgb& c : img) {
    char px[3];
    if (!in.read(px, 3)) throw InputError("truncated PPM");
    c = {static_cast<std::uint8_t>(px[0]), static_cast<std::uint8_t>(px[1]),
         static_cast<std::uint8_t>(px[2])};
  }
  return img;
}

}  // namespace distsurf
