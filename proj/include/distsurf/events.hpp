#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "distsurf/grid.hpp"

namespace distsurf {

/// Timestamps are integer microseconds everywhere upstream of the solver.
using Micros = std::int64_t;

inline constexpr Micros kDefaultWindowUs = 5000;

inline constexpr double micros_to_seconds(Micros us) noexcept {
  return static_cast<double>(us) * 1e-6;
}

struct Event {
  Micros t = 0;
  int x = 0;
  int y = 0;
  std::int8_t p = 1;  // -1 or +1; never consulted by the distance surface

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int width = 346;
  int height = 260;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("sensor size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal length must be positive");
  }

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// Events sorted by nondecreasing timestamp, all within the sensor.
struct EventStream {
  std::vector<Event> events;
  SensorGeometry geometry;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }

  // Index range of events with begin <= t < end.
  std::pair<std::size_t, std::size_t> range(Micros begin, Micros end) const {
    auto by_time = [](const Event& e, Micros t) { return e.t < t; };
    auto lo = std::lower_bound(events.begin(), events.end(), begin, by_time);
    auto hi = std::lower_bound(lo, events.end(), std::max(begin, end), by_time);
    return {static_cast<std::size_t>(lo - events.begin()),
            static_cast<std::size_t>(hi - events.begin())};
  }
};

/// Pixels that fired at least once during [begin, end), in row-major order,
/// each with its in-window timestamps.
struct EventWindow {
  Micros t_eval = 0;
  Micros delta_t = kDefaultWindowUs;
  Micros begin = 0;
  Micros end = 0;
  int width = 0;
  int height = 0;
  std::vector<Pixel> pixels;
  std::vector<std::vector<Micros>> per_pixel_events;

  bool empty() const noexcept { return pixels.empty(); }
  std::size_t size() const noexcept { return pixels.size(); }

  bool contains(Pixel p) const {
    auto it = std::lower_bound(pixels.begin(), pixels.end(), p, row_major_less);
    return it != pixels.end() && *it == p;
  }

  Grid<std::uint8_t> mask() const {
    Grid<std::uint8_t> m(width, height, 0);
    for (const Pixel& p : pixels) m(p.x, p.y) = 1;
    return m;
  }

  static bool row_major_less(const Pixel& a, const Pixel& b) noexcept {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }

  /// Rebuilds a window from an arbitrary pixel list; duplicates are merged.
  static EventWindow from_pixels(int width, int height, std::vector<std::pair<Pixel, Micros>> hits,
                                 Micros t_eval = 0, Micros delta_t = kDefaultWindowUs) {
    EventWindow w;
    w.t_eval = t_eval;
    w.delta_t = delta_t;
    w.begin = t_eval - delta_t;
    w.end = t_eval;
    w.width = width;
    w.height = height;
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      return row_major_less(a.first, b.first);
    });
    for (const auto& [p, t] : hits) {
      if (w.pixels.empty() || !(w.pixels.back() == p)) {
        w.pixels.push_back(p);
        w.per_pixel_events.emplace_back();
      }
      w.per_pixel_events.back().push_back(t);
    }
    return w;
  }
};

namespace detail {

template <typename Keep>
EventWindow collect_window(const EventStream& stream, Micros begin, Micros end, Micros t_eval,
                           Micros delta_t, Keep&& keep) {
  const auto [lo, hi] = stream.range(begin, end);
  std::vector<std::pair<Pixel, Micros>> hits;
  hits.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) {
    if (!keep(i)) continue;
    const Event& e = stream.events[i];
    hits.push_back({Pixel{e.x, e.y}, e.t});
  }
  EventWindow w = EventWindow::from_pixels(stream.geometry.width, stream.geometry.height,
                                           std::move(hits), t_eval, delta_t);
  w.begin = begin;
  w.end = end;
  return w;
}

inline void require_positive(Micros delta_t) {
  if (delta_t <= 0) throw std::invalid_argument("window length must be positive");
}

}  // namespace detail

/// Pixels with at least one event in [t_eval - delta_t, t_eval).
inline EventWindow window_at(const EventStream& stream, Micros t_eval,
                             Micros delta_t = kDefaultWindowUs) {
  detail::require_positive(delta_t);
  return detail::collect_window(stream, t_eval - delta_t, t_eval, t_eval, delta_t,
                                [](std::size_t) { return true; });
}

/// The windows immediately before, [t-dt, t), and after, [t, t+dt), the
/// evaluation time.
inline std::pair<EventWindow, EventWindow> window_pair(const EventStream& stream, Micros t_eval,
                                                       Micros delta_t = kDefaultWindowUs) {
  detail::require_positive(delta_t);
  auto all = [](std::size_t) { return true; };
  return {detail::collect_window(stream, t_eval - delta_t, t_eval, t_eval, delta_t, all),
          detail::collect_window(stream, t_eval, t_eval + delta_t, t_eval, delta_t, all)};
}

inline Micros ceil_to_multiple(Micros t, Micros step) {
  Micros q = t / step;
  if (q * step < t) ++q;
  return q * step;
}

/// Evaluation cadence t_k = t_start + k*stride. t_start defaults to the first
/// timestamp rounded up to a multiple of delta_t; the last t_k is the latest
/// whose after-window [t_k, t_k + delta_t) ends within the recorded span.
inline std::vector<Micros> evaluation_times(const EventStream& stream, Micros delta_t,
                                            Micros stride, std::optional<Micros> t_start = {}) {
  detail::require_positive(delta_t);
  detail::require_positive(stride);
  std::vector<Micros> times;
  if (stream.empty()) return times;
  const Micros last = stream.events.back().t;
  const Micros first = t_start.value_or(ceil_to_multiple(stream.events.front().t, delta_t));
  for (Micros t = first; t + delta_t <= last + 1; t += stride)
    times.push_back(t);
  return times;
}

}  // namespace distsurf
