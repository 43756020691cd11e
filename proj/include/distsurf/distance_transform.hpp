#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "distsurf/error.hpp"
#include "distsurf/events.hpp"
#include "distsurf/grid.hpp"

namespace distsurf {

inline double distance(Pixel a, Pixel b) noexcept {
  const double dx = static_cast<double>(a.x) - b.x;
  const double dy = static_cast<double>(a.y) - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

/// Distance to the nearest event pixel, with the pixel that attains it.
///
/// Invariants: d(X) == 0 exactly on event pixels, d(X) == |X - nearest(X)|,
/// and among equidistant events the one with the smallest row-major index is
/// reported.
struct DistanceSurface {
  Grid<double> d;
  Grid<std::int64_t> squared;  // exact integer squared distances
  Grid<Pixel> nearest;
  Micros window_begin = 0;
  Micros window_end = 0;

  int width() const noexcept { return d.width(); }
  int height() const noexcept { return d.height(); }
};

namespace detail {

inline constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max();

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

/// Exact 1-D lower envelope of the parabolas (x - q)^2 + f[q] over integer x,
/// ordered lexicographically by (value, key[q]). Entries with f == kFar are
/// absent. For two sources a < b the set of x where b wins is a right
/// half-line, so the classic stack construction applies unchanged; only the
/// boundary between neighbours is computed with integer arithmetic and the
/// tie key.
class LowerEnvelope {
 public:
  explicit LowerEnvelope(int n) : v_(n), z_(n) {}

  // Writes value[x] and arg[x] for x in [0, n). Returns false if every f is kFar.
  template <typename F, typename K, typename Out>
  bool run(int n, F&& f, K&& key, Out&& out) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
      const std::int64_t fq = f(q);
      if (fq == kFar) continue;
      std::int64_t s = std::numeric_limits<std::int64_t>::min();
      while (k >= 0) {
        s = start(v_[k], q, f(v_[k]), fq, key(v_[k]), key(q));
        if (s <= z_[k])
          --k;
        else
          break;
      }
      ++k;
      v_[k] = q;
      z_[k] = k == 0 ? std::numeric_limits<std::int64_t>::min() : s;
    }
    if (k < 0) return false;
    const int top = k;
    k = 0;
    for (int x = 0; x < n; ++x) {
      while (k < top && z_[k + 1] <= x) ++k;
      const std::int64_t dx = x - v_[k];
      out(x, dx * dx + f(v_[k]), v_[k]);
    }
    return true;
  }

 private:
  // First integer x at which source b (> a) beats source a.
  static std::int64_t start(std::int64_t a, std::int64_t b, std::int64_t fa, std::int64_t fb,
                            std::int64_t key_a, std::int64_t key_b) {
    const std::int64_t num = (fb + b * b) - (fa + a * a);
    const std::int64_t den = 2 * (b - a);
    return key_b < key_a ? ceil_div(num, den) : floor_div(num, den) + 1;
  }

  std::vector<int> v_;
  std::vector<std::int64_t> z_;
};

}  // namespace detail

/// Exact Euclidean distance transform of the window's pixel set, separable
/// two-pass lower-envelope construction, linear in the number of pixels.
/// Throws EmptyWindow when the window has no pixels.
inline DistanceSurface transform(const EventWindow& window, const SensorGeometry& geometry) {
  if (window.empty()) throw EmptyWindow();
  const int w = geometry.width;
  const int h = geometry.height;
  using detail::kFar;

  Grid<std::uint8_t> is_event(w, h, 0);
  for (const Pixel& p : window.pixels) {
    if (!geometry.contains(p.x, p.y)) throw std::out_of_range("window pixel outside sensor");
    is_event(p.x, p.y) = 1;
  }

  // Pass 1: nearest event row within each column.
  Grid<std::int64_t> col_sq(w, h, kFar);
  Grid<int> col_row(w, h, -1);
  detail::LowerEnvelope column_env(h);
  for (int x = 0; x < w; ++x) {
    column_env.run(
        h, [&](int y) { return is_event(x, y) ? std::int64_t{0} : kFar; },
        [](int y) { return static_cast<std::int64_t>(y); },
        [&](int y, std::int64_t value, int arg) {
          col_sq(x, y) = value;
          col_row(x, y) = arg;
        });
  }

  // Pass 2: combine columns along each row.
  DistanceSurface surface;
  surface.d = Grid<double>(w, h, 0.0);
  surface.squared = Grid<std::int64_t>(w, h, 0);
  surface.nearest = Grid<Pixel>(w, h);
  surface.window_begin = window.begin;
  surface.window_end = window.end;
  detail::LowerEnvelope row_env(w);
  for (int y = 0; y < h; ++y) {
    row_env.run(
        w, [&](int x) { return col_sq(x, y); },
        [&](int x) {
          return static_cast<std::int64_t>(col_row(x, y)) * w + x;
        },
        [&](int x, std::int64_t value, int arg) {
          surface.squared(x, y) = value;
          surface.d(x, y) = std::sqrt(static_cast<double>(value));
          surface.nearest(x, y) = Pixel{arg, col_row(arg, y)};
        });
  }
  return surface;
}

/// Test-harness noise model: Lambda drops window pixels, Omega injects
/// uniformly random pixels.
struct PerturbationSpec {
  double hole_fraction = 0.0;    // probability of dropping each pixel, in [0, 1)
  double false_event_rate = 0.0; // injected pixels per sensor pixel, >= 0

  void validate() const {
    if (!(hole_fraction >= 0.0 && hole_fraction < 1.0))
      throw std::invalid_argument("hole_fraction must be in [0, 1)");
    if (!(false_event_rate >= 0.0)) throw std::invalid_argument("false_event_rate must be >= 0");
  }
};

inline EventWindow perturb(const EventWindow& window, const PerturbationSpec& spec,
                           std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(spec.hole_fraction);
  std::vector<std::pair<Pixel, Micros>> hits;
  for (std::size_t i = 0; i < window.pixels.size(); ++i) {
    if (drop(rng)) continue;
    for (Micros t : window.per_pixel_events[i]) hits.push_back({window.pixels[i], t});
  }
  const auto injected = static_cast<std::size_t>(
      std::llround(spec.false_event_rate * window.width * window.height));
  std::uniform_int_distribution<int> rx(0, window.width - 1);
  std::uniform_int_distribution<int> ry(0, window.height - 1);
  const Micros span = std::max<Micros>(window.end - window.begin, 1);
  std::uniform_int_distribution<Micros> rt(0, span - 1);
  for (std::size_t i = 0; i < injected; ++i) {
    Pixel p{rx(rng), ry(rng)};
    hits.push_back({p, window.begin + rt(rng)});
  }
  EventWindow out = EventWindow::from_pixels(window.width, window.height, std::move(hits),
                                             window.t_eval, window.delta_t);
  out.begin = window.begin;
  out.end = window.end;
  return out;
}

}  // namespace distsurf
