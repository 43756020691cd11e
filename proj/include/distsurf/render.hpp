#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "distsurf/flow_io.hpp"
#include "distsurf/flow_solver.hpp"

namespace distsurf {

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto q = [](double f) { return static_cast<std::uint8_t>(std::lround(std::clamp(f, 0.0, 1.0) * 255.0)); };
  return {q(r + m), q(g + m), q(b + m)};
}

/// Colour-wheel rendering: hue is direction, saturation and brightness grow
/// with magnitude normalized to the image maximum. Zero flow is mid-gray.
inline Grid<Rgb> render_flow(const Grid<double>& u, const Grid<double>& v) {
  double peak = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) peak = std::max(peak, std::hypot(u[i], v[i]));
  Grid<Rgb> img(u.width(), u.height());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double m = peak > 0.0 ? std::hypot(u[i], v[i]) / peak : 0.0;
    const double hue = std::atan2(v[i], u[i]) * 180.0 / std::numbers::pi;
    img[i] = hsv_to_rgb(hue, m, 0.5 + 0.5 * m);
  }
  return img;
}

inline void draw_line(Grid<Rgb>& img, int x0, int y0, int x1, int y1, Rgb color) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (img.contains(x0, y0)) img(x0, y0) = color;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

/// Arrow glyphs at every `stride`-th event, longest arrow `max_len` px.
inline void draw_event_arrows(Grid<Rgb>& img, const EventFlow& flow, double max_len = 8.0,
                              std::size_t stride = 1, Rgb color = {0, 0, 0}) {
  double peak = 0.0;
  for (const auto& e : flow.entries) peak = std::max(peak, std::hypot(e.u, e.v));
  for (std::size_t k = 0; k < flow.entries.size(); k += std::max<std::size_t>(stride, 1)) {
    const auto& e = flow.entries[k];
    const double m = std::hypot(e.u, e.v);
    const double s = peak > 0.0 ? max_len / peak : 0.0;
    const int x1 = static_cast<int>(std::lround(e.x + e.u * s));
    const int y1 = static_cast<int>(std::lround(e.y + e.v * s));
    draw_line(img, e.x, e.y, x1, y1, color);
    if (m > 0.0 && s > 0.0) {
      const double ang = std::atan2(e.v, e.u);
      for (double side : {2.5, -2.5}) {
        const double a = ang + side;
        draw_line(img, x1, y1, static_cast<int>(std::lround(x1 + 2.5 * std::cos(a))),
                  static_cast<int>(std::lround(y1 + 2.5 * std::sin(a))), color);
      }
    }
  }
}

}  // namespace distsurf
