#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "distsurf/derivatives.hpp"
#include "distsurf/error.hpp"
#include "distsurf/events.hpp"
#include "distsurf/grid.hpp"

namespace distsurf {

/// Lorentzian penalty log(1 + r^2 / (2 sigma^2)).
inline double lorentzian(double r, double sigma) {
  return std::log1p(r * r / (2.0 * sigma * sigma));
}

/// d/dr of lorentzian(r, sigma) = 2r / (2 sigma^2 + r^2).
inline double lorentzian_derivative(double r, double sigma) {
  return 2.0 * r / (2.0 * sigma * sigma + r * r);
}

/// IRLS weight psi'(r)/r = 2 / (2 sigma^2 + r^2).
inline double lorentzian_weight(double r, double sigma) {
  return 2.0 / (2.0 * sigma * sigma + r * r);
}

struct SolverConfig {
  double lambda = 0.1;
  double sigma = 1.0;  // in pixels of displacement per window
  int outer_iters = 10;
  int inner_iters = 50;
  int gnc_stages = 3;
  double convergence_tol = 1e-4;

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (outer_iters < 1 || inner_iters < 1 || gnc_stages < 1)
      throw std::invalid_argument("iteration counts must be >= 1");
    if (!(convergence_tol >= 0.0)) throw std::invalid_argument("convergence_tol must be >= 0");
  }
};

struct EnergySample {
  int stage = 0;
  int iteration = 0;  // 0 is the stage's starting point
  double energy = 0.0;
};

/// Dense velocity field in pixels per second.
struct FlowField {
  Grid<double> u;
  Grid<double> v;
  std::vector<EnergySample> energy_trace;
  Micros t_eval = 0;

  int width() const noexcept { return u.width(); }
  int height() const noexcept { return u.height(); }
};

/// The discrete robust Horn-Schunck objective at one graduated non-convexity
/// blend. Unknowns are displacements per window (px); the data term is
///   sum_X weight(X) * rho(dx*a + dy*b + dt)
/// and the smoothness term lambda * sum_X [rho(|grad a|) + rho(|grad b|)] with
/// forward differences (absent at the last row/column). rho blends the
/// quadratic r^2/(2 sigma^2) (alpha = 0) into the Lorentzian (alpha = 1).
struct FlowProblem {
  Grid<double> dx;
  Grid<double> dy;
  Grid<double> dt;      // displacement units: px per window
  Grid<double> weight;  // data-term weight, 0 on masked pixels
  double lambda = 0.1;
  double sigma = 1.0;

  int width() const noexcept { return dx.width(); }
  int height() const noexcept { return dx.height(); }

  // rho as a function of the squared argument, and its derivative.
  double phi(double s, double alpha) const {
    const double k = 2.0 * sigma * sigma;
    return (1.0 - alpha) * s / k + alpha * std::log1p(s / k);
  }
  double phi_prime(double s, double alpha) const {
    const double k = 2.0 * sigma * sigma;
    return (1.0 - alpha) / k + alpha / (k + s);
  }

  double residual(const Grid<double>& a, const Grid<double>& b, std::size_t i) const {
    return dx[i] * a[i] + dy[i] * b[i] + dt[i];
  }

  double grad_sq(const Grid<double>& f, int x, int y) const {
    double s = 0.0;
    if (x + 1 < width()) {
      const double g = f(x + 1, y) - f(x, y);
      s += g * g;
    }
    if (y + 1 < height()) {
      const double g = f(x, y + 1) - f(x, y);
      s += g * g;
    }
    return s;
  }

  double energy(const Grid<double>& a, const Grid<double>& b, double alpha) const {
    double data = 0.0;
    double smooth = 0.0;
    for (int y = 0; y < height(); ++y) {
      for (int x = 0; x < width(); ++x) {
        const std::size_t i = dx.index(x, y);
        const double r = residual(a, b, i);
        data += weight[i] * phi(r * r, alpha);
        smooth += phi(grad_sq(a, x, y), alpha) + phi(grad_sq(b, x, y), alpha);
      }
    }
    return data + lambda * smooth;
  }

  /// Analytic gradient of energy() with respect to (a, b).
  void gradient(const Grid<double>& a, const Grid<double>& b, double alpha, Grid<double>& ga,
                Grid<double>& gb) const {
    const int w = width();
    const int h = height();
    ga = Grid<double>(w, h, 0.0);
    gb = Grid<double>(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = dx.index(x, y);
        const double r = residual(a, b, i);
        const double wd = 2.0 * weight[i] * phi_prime(r * r, alpha) * r;
        ga[i] += wd * dx[i];
        gb[i] += wd * dy[i];
        smooth_gradient(a, x, y, alpha, ga);
        smooth_gradient(b, x, y, alpha, gb);
      }
    }
  }

 private:
  void smooth_gradient(const Grid<double>& f, int x, int y, double alpha, Grid<double>& g) const {
    const double c = 2.0 * lambda * phi_prime(grad_sq(f, x, y), alpha);
    if (x + 1 < width()) {
      const double d = f(x + 1, y) - f(x, y);
      g(x + 1, y) += c * d;
      g(x, y) -= c * d;
    }
    if (y + 1 < height()) {
      const double d = f(x, y + 1) - f(x, y);
      g(x, y + 1) += c * d;
      g(x, y) -= c * d;
    }
  }
};

inline FlowProblem make_problem(const DerivativeField& field, const SolverConfig& cfg,
                                const Grid<std::uint8_t>& mask) {
  const int w = field.width();
  const int h = field.height();
  if (field.dy.width() != w || field.dt.width() != w || field.dy.height() != h ||
      field.dt.height() != h)
    throw std::invalid_argument("derivative grids differ in size");
  if (!mask.empty() && (mask.width() != w || mask.height() != h))
    throw std::invalid_argument("boundary mask does not match the derivative field");
  for (std::size_t i = 0; i < field.dx.size(); ++i)
    if (!std::isfinite(field.dx[i]) || !std::isfinite(field.dy[i]) || !std::isfinite(field.dt[i]))
      throw NonFiniteInput("derivative field contains non-finite values");

  const double seconds = micros_to_seconds(field.delta_t);
  FlowProblem p{field.dx, field.dy, Grid<double>(w, h, 0.0), Grid<double>(w, h, 1.0), cfg.lambda,
                cfg.sigma};
  for (std::size_t i = 0; i < p.dt.size(); ++i) {
    p.dt[i] = field.dt[i] * seconds;
    if (!mask.empty() && mask[i] == 0) p.weight[i] = 0.0;
  }
  return p;
}

namespace detail {

inline double stage_blend(int stage, int stages) {
  return stages <= 1 ? 1.0 : static_cast<double>(stage) / (stages - 1);
}

// One red-black Gauss-Seidel sweep over the quadratic majorizer with fixed
// weights. Each pixel update is the exact 2x2 block minimizer, so the
// majorizer never increases. Returns the squared update norm.
inline double red_black_sweep(const FlowProblem& p, const Grid<double>& wd, const Grid<double>& wa,
                              const Grid<double>& wb, Grid<double>& a, Grid<double>& b) {
  const int w = p.width();
  const int h = p.height();
  const double lambda = p.lambda;
  double change = 0.0;
  for (int color = 0; color < 2; ++color) {
    for (int y = 0; y < h; ++y) {
      for (int x = (y + color) & 1; x < w; x += 2) {
        const std::size_t i = a.index(x, y);
        double sa = 0.0, sb = 0.0, na = 0.0, nb = 0.0;
        auto edge = [&](std::size_t j, double ea, double eb) {
          sa += ea;
          sb += eb;
          na += ea * a[j];
          nb += eb * b[j];
        };
        if (x + 1 < w) edge(i + 1, wa[i], wb[i]);
        if (y + 1 < h) edge(i + static_cast<std::size_t>(w), wa[i], wb[i]);
        if (x > 0) edge(i - 1, wa[i - 1], wb[i - 1]);
        if (y > 0) {
          const std::size_t j = i - static_cast<std::size_t>(w);
          edge(j, wa[j], wb[j]);
        }
        const double gx = p.dx[i];
        const double gy = p.dy[i];
        const double wi = wd[i];
        const double a11 = wi * gx * gx + lambda * sa;
        const double a12 = wi * gx * gy;
        const double a22 = wi * gy * gy + lambda * sb;
        const double r1 = lambda * na - wi * gx * p.dt[i];
        const double r2 = lambda * nb - wi * gy * p.dt[i];
        const double det = a11 * a22 - a12 * a12;
        if (!(det > 0.0)) continue;
        const double new_a = (a22 * r1 - a12 * r2) / det;
        const double new_b = (a11 * r2 - a12 * r1) / det;
        change += (new_a - a[i]) * (new_a - a[i]) + (new_b - b[i]) * (new_b - b[i]);
        a[i] = new_a;
        b[i] = new_b;
      }
    }
  }
  return change;
}

inline double squared_norm(const Grid<double>& a, const Grid<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i] + b[i] * b[i];
  return s;
}

}  // namespace detail

/// Minimizes FlowProblem::energy by graduated non-convexity over
/// cfg.gnc_stages blends, each running IRLS outer iterations whose weighted
/// least-squares subproblems are relaxed with red-black Gauss-Seidel.
/// (a, b) hold the starting displacements on entry and the result on exit.
inline std::vector<EnergySample> minimize(const FlowProblem& p, const SolverConfig& cfg,
                                          Grid<double>& a, Grid<double>& b) {
  cfg.validate();
  const int w = p.width();
  const int h = p.height();
  std::vector<EnergySample> trace;
  Grid<double> wd(w, h), wa(w, h), wb(w, h);
  const double tol_sq = cfg.convergence_tol * cfg.convergence_tol;

  for (int stage = 0; stage < cfg.gnc_stages; ++stage) {
    const double alpha = detail::stage_blend(stage, cfg.gnc_stages);
    trace.push_back({stage, 0, p.energy(a, b, alpha)});
    for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = a.index(x, y);
          const double r = p.residual(a, b, i);
          wd[i] = p.weight[i] * p.phi_prime(r * r, alpha);
          wa[i] = p.phi_prime(p.grad_sq(a, x, y), alpha);
          wb[i] = p.phi_prime(p.grad_sq(b, x, y), alpha);
        }
      }
      const Grid<double> a0 = a;
      const Grid<double> b0 = b;
      for (int inner = 0; inner < cfg.inner_iters; ++inner) {
        const double change = detail::red_black_sweep(p, wd, wa, wb, a, b);
        if (change <= tol_sq * std::max(detail::squared_norm(a, b), 1e-300)) break;
      }
      const double energy = p.energy(a, b, alpha);
      if (!std::isfinite(energy)) throw NumericalError("flow energy became non-finite");
      trace.push_back({stage, outer, energy});

      double moved = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i)
        moved += (a[i] - a0[i]) * (a[i] - a0[i]) + (b[i] - b0[i]) * (b[i] - b0[i]);
      if (moved <= tol_sq * std::max(detail::squared_norm(a, b), 1e-300)) break;
    }
  }
  return trace;
}

/// Dense flow (px/s) from a derivative field, starting from zero flow.
/// Pixels where `boundary_mask` is 0 carry no data term; an empty mask
/// disables masking.
inline FlowField solve(const DerivativeField& field, const SolverConfig& cfg = {},
                       const Grid<std::uint8_t>& boundary_mask = {}) {
  cfg.validate();
  const FlowProblem problem = make_problem(field, cfg, boundary_mask);
  Grid<double> a(field.width(), field.height(), 0.0);
  Grid<double> b(field.width(), field.height(), 0.0);
  FlowField flow;
  flow.energy_trace = minimize(problem, cfg, a, b);
  const double inv = 1.0 / micros_to_seconds(field.delta_t);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] *= inv;
    b[i] *= inv;
  }
  flow.u = std::move(a);
  flow.v = std::move(b);
  flow.t_eval = field.t_eval;
  return flow;
}

struct FlowEntry {
  Micros t = 0;
  int x = 0;
  int y = 0;
  double u = 0.0;  // px/s
  double v = 0.0;

  friend bool operator==(const FlowEntry&, const FlowEntry&) = default;
};

/// Sparse per-event velocities.
struct EventFlow {
  std::vector<FlowEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
};

/// Each event pixel is its own nearest event, so it takes the dense velocity
/// at its own location. One entry per in-window event.
inline EventFlow sample_at_events(const FlowField& flow, const EventWindow& window) {
  EventFlow out;
  for (std::size_t k = 0; k < window.pixels.size(); ++k) {
    const Pixel p = window.pixels[k];
    if (!flow.u.contains(p.x, p.y)) throw std::out_of_range("event pixel outside flow field");
    for (Micros t : window.per_pixel_events[k])
      out.entries.push_back({t, p.x, p.y, flow.u(p.x, p.y), flow.v(p.x, p.y)});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const FlowEntry& l, const FlowEntry& r) { return l.t < r.t; });
  return out;
}

}  // namespace distsurf
