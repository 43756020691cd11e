#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distsurf/distance_transform.hpp"
#include "distsurf/events.hpp"
#include "distsurf/flow_solver.hpp"

namespace distsurf {

enum class PatternKind {
  translating_bar,
  translating_square,
  checkerboard,
  rotating_square,
  two_objects_crossing,
};

inline std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::translating_bar: return "translating_bar";
    case PatternKind::translating_square: return "translating_square";
    case PatternKind::checkerboard: return "checkerboard";
    case PatternKind::rotating_square: return "rotating_square";
    case PatternKind::two_objects_crossing: return "two_objects_crossing";
  }
  return "?";
}

inline PatternKind parse_pattern_kind(std::string_view s) {
  for (auto k : {PatternKind::translating_bar, PatternKind::translating_square,
                 PatternKind::checkerboard, PatternKind::rotating_square,
                 PatternKind::two_objects_crossing})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown pattern '" + std::string(s) + "'");
}

/// A bright object over a uniform background. Objects are rectangles with a
/// one-pixel linear edge ramp (box-filtered sampling at pixel centres).
///
///   translating_bar / translating_square: rectangle `size_x` x `size_y`
///     (squares use size_x for both) moving at (vx, vy).
///   checkerboard: `size_x` x `size_y` board of `cell`-pixel squares moving at
///     (vx, vy); light cells carry the contrast.
///   rotating_square: square of side size_x spinning at `angular_rate`
///     about its centre.
///   two_objects_crossing: two squares of side size_x, the first moving at
///     (vx, vy) from `center - offset`, the second at (-vx, -vy) from
///     `center + offset`; the second occludes the first.
struct ScenePattern {
  PatternKind kind = PatternKind::translating_square;
  double contrast = 2.0;    // object intensity / background intensity
  double background = 1.0;  // background intensity
  double vx = 200.0;        // px/s
  double vy = 0.0;
  double angular_rate = 0.0;  // rad/s
  double center_x = 64.0;     // object centre at t = 0
  double center_y = 64.0;
  double size_x = 32.0;
  double size_y = 32.0;
  double cell = 8.0;
  double offset_x = 0.0;  // two_objects_crossing only
  double offset_y = 12.0;

  void validate() const {
    if (!(contrast > 0.0) || !(background > 0.0))
      throw std::invalid_argument("intensities must be positive");
    if (!(size_x > 0.0) || !(size_y > 0.0) || !(cell > 0.0))
      throw std::invalid_argument("pattern sizes must be positive");
  }

  /// Log intensity at pixel centre (x, y) and time t (seconds).
  double log_intensity(double x, double y, double t) const {
    const double bright = background * contrast;
    switch (kind) {
      case PatternKind::translating_bar:
      case PatternKind::translating_square:
      case PatternKind::rotating_square: {
        const double c = coverage(object_sd(0, x, y, t));
        return std::log(background + (bright - background) * c);
      }
      case PatternKind::checkerboard: {
        const double c = coverage(object_sd(0, x, y, t)) * checker_value(x, y, t);
        return std::log(background + (bright - background) * c);
      }
      case PatternKind::two_objects_crossing: {
        const double ca = coverage(object_sd(0, x, y, t));
        const double cb = coverage(object_sd(1, x, y, t));
        const double under = background + (bright - background) * ca;
        // second object is drawn at a different shade so its own edges fire
        const double top = background * std::sqrt(contrast) * contrast;
        return std::log(under * (1.0 - cb) + top * cb);
      }
    }
    return std::log(background);
  }

  /// Analytic image velocity (px/s) of the surface seen at pixel (x, y).
  std::pair<double, double> velocity_at(double x, double y, double t) const {
    switch (kind) {
      case PatternKind::rotating_square: {
        const double rx = x - center_x;
        const double ry = y - center_y;
        return {-angular_rate * ry, angular_rate * rx};
      }
      case PatternKind::two_objects_crossing:
        if (object_sd(1, x, y, t) < 1.5) return {-vx, -vy};
        return {vx, vy};
      default:
        return {vx, vy};
    }
  }

  /// Distance from (x, y) to the nearest intensity edge at time t.
  double edge_distance(double x, double y, double t) const {
    switch (kind) {
      case PatternKind::checkerboard: {
        const double sd = object_sd(0, x, y, t);
        if (sd > 0.0) return sd;
        const double lx = x - (center_x + vx * t) + size_x / 2.0;
        const double ly = y - (center_y + vy * t) + size_y / 2.0;
        auto to_line = [&](double v) {
          const double m = std::fmod(v, cell);
          const double r = m < 0 ? m + cell : m;
          return std::min(r, cell - r);
        };
        return std::min({-sd, to_line(lx), to_line(ly)});
      }
      case PatternKind::two_objects_crossing:
        return std::min(std::abs(object_sd(0, x, y, t)), std::abs(object_sd(1, x, y, t)));
      default:
        return std::abs(object_sd(0, x, y, t));
    }
  }

 private:
  static double coverage(double sd) { return std::clamp(0.5 - sd, 0.0, 1.0); }

  static double rect_sd(double px, double py, double hx, double hy) {
    const double qx = std::abs(px) - hx;
    const double qy = std::abs(py) - hy;
    const double ox = std::max(qx, 0.0);
    const double oy = std::max(qy, 0.0);
    return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
  }

  // Signed distance to object `which` (negative inside).
  double object_sd(int which, double x, double y, double t) const {
    switch (kind) {
      case PatternKind::translating_square:
        return rect_sd(x - (center_x + vx * t), y - (center_y + vy * t), size_x / 2, size_x / 2);
      case PatternKind::translating_bar:
      case PatternKind::checkerboard:
        return rect_sd(x - (center_x + vx * t), y - (center_y + vy * t), size_x / 2, size_y / 2);
      case PatternKind::rotating_square: {
        const double th = -angular_rate * t;
        const double px = x - center_x;
        const double py = y - center_y;
        const double lx = std::cos(th) * px - std::sin(th) * py;
        const double ly = std::sin(th) * px + std::cos(th) * py;
        return rect_sd(lx, ly, size_x / 2, size_x / 2);
      }
      case PatternKind::two_objects_crossing: {
        const double sign = which == 0 ? 1.0 : -1.0;
        const double ox = center_x - sign * offset_x + sign * vx * t;
        const double oy = center_y - sign * offset_y + sign * vy * t;
        return rect_sd(x - ox, y - oy, size_x / 2, size_x / 2);
      }
    }
    return 1e9;
  }

  // Box-filtered checker in [0, 1]: 0.5 + 0.5 * S(x) S(y), S the box average
  // of a +-1 square wave with period 2*cell.
  double checker_value(double x, double y, double t) const {
    const double lx = x - (center_x + vx * t) + size_x / 2.0;
    const double ly = y - (center_y + vy * t) + size_y / 2.0;
    auto tri = [&](double v) {  // antiderivative of the square wave
      const double period = 2.0 * cell;
      double m = std::fmod(v, period);
      if (m < 0) m += period;
      return m < cell ? m : period - m;
    };
    auto smooth = [&](double v) { return tri(v + 0.5) - tri(v - 0.5); };
    return 0.5 + 0.5 * smooth(lx) * smooth(ly);
  }
};

struct SimConfig {
  double ell = 0.2;         // log-intensity threshold
  Micros sample_dt = 100;   // intensity sampling step
  Micros duration = 100000;
  std::uint64_t seed = 1;
  PerturbationSpec noise;   // holes drop true events; false events per pixel per noise_window
  Micros noise_window = kDefaultWindowUs;

  void validate() const {
    if (!(ell > 0.0)) throw std::invalid_argument("ell must be positive");
    if (sample_dt <= 0) throw std::invalid_argument("sample_dt must be positive");
    if (duration < 0) throw std::invalid_argument("duration must be >= 0");
    if (noise_window <= 0) throw std::invalid_argument("noise_window must be positive");
    noise.validate();
  }
};

using GroundTruthFlow = EventFlow;

struct SimResult {
  EventStream stream;
  GroundTruthFlow truth;         // one entry per signal event, sorted by t
  std::vector<bool> is_noise;    // aligned with stream.events
};

/// Dense time-stepped event generation. Each pixel keeps a reference log
/// intensity; when |log I - ref| > ell at a sample step, floor(|change|/ell)
/// events of the change's sign are emitted (10 us apart, ending at the
/// sample time) and the reference is reset to the current value.
inline SimResult simulate(const ScenePattern& pattern, const SensorGeometry& geometry,
                          const SimConfig& cfg) {
  pattern.validate();
  cfg.validate();
  geometry.validate();
  const int w = geometry.width;
  const int h = geometry.height;
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution hole(cfg.noise.hole_fraction);

  struct Tagged {
    Event e;
    bool noise;
  };
  std::vector<Tagged> out;
  std::vector<double> ref(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      ref[static_cast<std::size_t>(y) * w + x] = pattern.log_intensity(x, y, 0.0);

  for (Micros t = cfg.sample_dt; t <= cfg.duration; t += cfg.sample_dt) {
    const double ts = micros_to_seconds(t);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double& r = ref[static_cast<std::size_t>(y) * w + x];
        const double now = pattern.log_intensity(x, y, ts);
        const double change = now - r;
        if (!(std::abs(change) > cfg.ell)) continue;
        const auto count = std::max<Micros>(1, static_cast<Micros>(std::floor(std::abs(change) / cfg.ell)));
        const Micros spacing = std::min<Micros>(10, cfg.sample_dt / count);
        const std::int8_t polarity = change > 0 ? 1 : -1;
        for (Micros j = 0; j < count; ++j) {
          if (hole(rng)) continue;
          out.push_back({Event{t - (count - 1 - j) * spacing, x, y, polarity}, false});
        }
        r = now;
      }
    }
  }

  const double windows = static_cast<double>(cfg.duration) / static_cast<double>(cfg.noise_window);
  const auto n_noise =
      static_cast<std::size_t>(std::llround(cfg.noise.false_event_rate * w * h * windows));
  if (n_noise > 0) {
    std::uniform_int_distribution<int> rx(0, w - 1), ry(0, h - 1);
    std::uniform_int_distribution<Micros> rt(0, std::max<Micros>(cfg.duration - 1, 0));
    std::bernoulli_distribution pol(0.5);
    for (std::size_t i = 0; i < n_noise; ++i) {
      Event e{rt(rng), rx(rng), ry(rng), 1};
      e.p = pol(rng) ? 1 : -1;
      out.push_back({e, true});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Tagged& a, const Tagged& b) { return a.e.t < b.e.t; });

  SimResult res;
  res.stream.geometry = geometry;
  res.stream.events.reserve(out.size());
  res.is_noise.reserve(out.size());
  for (const Tagged& tg : out) {
    res.stream.events.push_back(tg.e);
    res.is_noise.push_back(tg.noise);
    if (!tg.noise) {
      auto [u, v] = pattern.velocity_at(tg.e.x, tg.e.y, micros_to_seconds(tg.e.t));
      res.truth.entries.push_back({tg.e.t, tg.e.x, tg.e.y, u, v});
    }
  }
  return res;
}

/// Truth entries for events in [t_eval - delta_t, t_eval).
inline EventFlow ground_truth_at(const GroundTruthFlow& truth, Micros t_eval,
                                 Micros delta_t = kDefaultWindowUs) {
  detail::require_positive(delta_t);
  EventFlow out;
  for (const FlowEntry& e : truth.entries)
    if (e.t >= t_eval - delta_t && e.t < t_eval) out.entries.push_back(e);
  return out;
}

}  // namespace distsurf
