#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "distsurf/denoise.hpp"
#include "distsurf/distance_transform.hpp"
#include "distsurf/events.hpp"
#include "distsurf/grid.hpp"

namespace distsurf {

/// Odd-length antisymmetric derivative stencil, applied as a convolution:
/// out(x) = normalization * sum_j coefficients[j] * in(x + radius - j).
/// With this orientation the default stencil returns +1 on the ramp f(x) = x.
class DerivativeKernel {
 public:
  DerivativeKernel(std::vector<double> coefficients, double normalization)
      : coefficients_(std::move(coefficients)), normalization_(normalization) {
    const std::size_t n = coefficients_.size();
    if (n % 2 == 0) throw std::invalid_argument("derivative stencil must have odd length");
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (coefficients_[j] != -coefficients_[n - 1 - j])
        throw std::invalid_argument("derivative stencil must be antisymmetric");
      sum += coefficients_[j];
    }
    if (sum != 0.0) throw std::invalid_argument("derivative stencil must sum to zero");
  }

  /// (1/12)(-1, 8, 0, -8, 1), the 4-point central difference.
  static DerivativeKernel four_point() { return DerivativeKernel({-1.0, 8.0, 0.0, -8.0, 1.0}, 1.0 / 12.0); }
  static DerivativeKernel central() { return DerivativeKernel({1.0, 0.0, -1.0}, 0.5); }

  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double normalization() const noexcept { return normalization_; }
  int radius() const noexcept { return static_cast<int>(coefficients_.size() / 2); }

  DerivativeKernel negated() const {
    std::vector<double> c = coefficients_;
    for (double& v : c) v = -v;
    return DerivativeKernel(std::move(c), normalization_);
  }

 private:
  std::vector<double> coefficients_;
  double normalization_;
};

struct SpatialGradient {
  Grid<double> dx;
  Grid<double> dy;
};

/// Row-wise and column-wise stencil response with replicated borders.
inline SpatialGradient spatial_gradient(const Grid<double>& d,
                                        const DerivativeKernel& kernel = DerivativeKernel::four_point()) {
  const int w = d.width();
  const int h = d.height();
  const int r = kernel.radius();
  const auto& c = kernel.coefficients();
  const double norm = kernel.normalization();
  SpatialGradient g{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0;
      double sy = 0.0;
      for (int j = 0; j < static_cast<int>(c.size()); ++j) {
        if (c[j] == 0.0) continue;
        sx += c[j] * d.clamped(x + r - j, y);
        sy += c[j] * d.clamped(x, y + r - j);
      }
      g.dx(x, y) = norm * sx;
      g.dy(x, y) = norm * sy;
    }
  }
  return g;
}

inline SpatialGradient spatial_gradient(const DistanceSurface& surface,
                                        const DerivativeKernel& kernel = DerivativeKernel::four_point()) {
  return spatial_gradient(surface.d, kernel);
}

/// (d_after - d_before) / delta_t, in distance units per second.
inline Grid<double> temporal_derivative(const Grid<double>& before, const Grid<double>& after,
                                        Micros delta_t) {
  detail::require_positive(delta_t);
  if (before.width() != after.width() || before.height() != after.height())
    throw std::invalid_argument("surfaces differ in size");
  const double inv = 1.0 / micros_to_seconds(delta_t);
  Grid<double> dt(before.width(), before.height(), 0.0);
  for (std::size_t i = 0; i < dt.size(); ++i) dt[i] = (after[i] - before[i]) * inv;
  return dt;
}

inline Grid<double> temporal_derivative(const DistanceSurface& before, const DistanceSurface& after,
                                        Micros delta_t) {
  return temporal_derivative(before.d, after.d, delta_t);
}

struct DerivativeField {
  Grid<double> dx;
  Grid<double> dy;
  Grid<double> dt;  // per second
  Micros t_eval = 0;
  Micros delta_t = kDefaultWindowUs;

  int width() const noexcept { return dx.width(); }
  int height() const noexcept { return dx.height(); }
};

/// 1 inside, 0 within `margin` pixels of the sensor border.
inline Grid<std::uint8_t> boundary_mask(int width, int height, int margin) {
  Grid<std::uint8_t> m(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (x < margin || y < margin || x >= width - margin || y >= height - margin) m(x, y) = 0;
  return m;
}

/// Clears `mask` wherever either surface's stencil gradient is not close to
/// unit length, or the two gradients disagree by more than `tolerance`.
/// A Euclidean distance map has |grad D| = 1 away from events and Voronoi
/// ridges; where the stencil straddles one of those kinks its response is
/// shortened. D+(X) = D-(X - V) also needs the same contour piece to be
/// nearest in both windows, which forces grad D+ = grad D-.
inline void apply_gradient_gate(const DerivativeField& field, const SpatialGradient& after,
                                double tolerance, Grid<std::uint8_t>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double bx = field.dx[i], by = field.dy[i];
    const double ax = after.dx[i], ay = after.dy[i];
    if (std::abs(std::hypot(bx, by) - 1.0) > tolerance ||
        std::abs(std::hypot(ax, ay) - 1.0) > tolerance ||
        std::hypot(ax - bx, ay - by) > tolerance)
      mask[i] = 0;
  }
}

/// Spatial gradient from the pre-t surface, temporal derivative from the pair.
inline DerivativeField derivative_field(const DistanceSurface& before, const DistanceSurface& after,
                                        Micros t_eval, Micros delta_t,
                                        const DerivativeKernel& kernel = DerivativeKernel::four_point()) {
  auto g = spatial_gradient(before, kernel);
  return DerivativeField{std::move(g.dx), std::move(g.dy), temporal_derivative(before, after, delta_t),
                         t_eval, delta_t};
}

struct DerivativeConfig {
  DenoiseConfig denoise;
  bool use_denoise = true;
};

/// Everything needed downstream of one evaluation time.
struct Assembled {
  EventWindow before;  // Phi- (or Phi' when denoising)
  EventWindow after;   // Phi+
  DerivativeField field;
};

/// Builds the windows around t_eval, their distance surfaces and derivatives.
/// `classes` may be empty when denoising is disabled. Throws EmptyWindow if
/// either window is empty.
inline Assembled assemble(const EventStream& stream, const std::vector<NoiseClass>& classes,
                          Micros t_eval, Micros delta_t, bool use_denoise,
                          const DerivativeKernel& kernel = DerivativeKernel::four_point()) {
  auto [before, after] = use_denoise ? denoised_window_pair(stream, classes, t_eval, delta_t)
                                     : window_pair(stream, t_eval, delta_t);
  const DistanceSurface s_before = transform(before, stream.geometry);
  const DistanceSurface s_after = transform(after, stream.geometry);
  DerivativeField field = derivative_field(s_before, s_after, t_eval, delta_t, kernel);
  return Assembled{std::move(before), std::move(after), std::move(field)};
}

inline DerivativeField assemble(const EventStream& stream, Micros t_eval, Micros delta_t,
                                const DerivativeConfig& cfg = {}) {
  std::vector<NoiseClass> classes;
  if (cfg.use_denoise) classes = classify(stream, cfg.denoise);
  return assemble(stream, classes, t_eval, delta_t, cfg.use_denoise).field;
}

}  // namespace distsurf
