#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "distsurf/error.hpp"
#include "distsurf/event_io.hpp"
#include "distsurf/events.hpp"
#include "distsurf/flow_solver.hpp"

namespace distsurf {

using Vec3 = std::array<double, 3>;

/// Gyroscope reading; omega in rad/s in the camera frame (x right, y down,
/// z forward).
struct ImuSample {
  Micros t = 0;
  Vec3 omega{};
};

struct ImuCalibration {
  Vec3 bias{};
  Micros calib_window = 3'000'000;
};

/// Gyro bias as the mean rate over [t0, t0 + window], the stationary prefix
/// of a recording. Needs at least 10 samples in that span.
inline ImuCalibration calibrate(const std::vector<ImuSample>& samples, Micros window = 3'000'000) {
  if (window <= 0) throw std::invalid_argument("calibration window must be positive");
  ImuCalibration cal;
  cal.calib_window = window;
  if (samples.empty()) throw InsufficientSamples("no IMU samples");
  const Micros t0 = samples.front().t;
  std::size_t n = 0;
  Vec3 sum{};
  for (const ImuSample& s : samples) {
    if (s.t > t0 + window) break;
    for (int k = 0; k < 3; ++k) sum[k] += s.omega[k];
    ++n;
  }
  if (n < 10)
    throw InsufficientSamples("calibration needs >= 10 IMU samples, got " + std::to_string(n));
  for (int k = 0; k < 3; ++k) cal.bias[k] = sum[k] / static_cast<double>(n);
  return cal;
}

/// Image motion of a static scene under pure camera rotation, pinhole model:
///   u = (xb*yb/fy) wx - (fx + xb^2/fx) wy + (fx/fy) yb wz
///   v = (fy + yb^2/fy) wx - (xb*yb/fx) wy - (fy/fx) xb wz
/// with xb = x - cx, yb = y - cy. Returns px/s.
inline std::pair<double, double> rotational_flow(const Vec3& omega, const SensorGeometry& g,
                                                 double x, double y) {
  const double xb = x - g.cx;
  const double yb = y - g.cy;
  const double u = (xb * yb / g.fy) * omega[0] - (g.fx + xb * xb / g.fx) * omega[1] +
                   (g.fx / g.fy) * yb * omega[2];
  const double v = (g.fy + yb * yb / g.fy) * omega[0] - (xb * yb / g.fx) * omega[1] -
                   (g.fy / g.fx) * xb * omega[2];
  return {u, v};
}

/// Maps raw gyro axes onto the camera frame. Each output axis picks a signed
/// input axis, e.g. "x,-y,z" or "y,x,-z".
struct ImuAxes {
  std::array<int, 3> source{0, 1, 2};
  std::array<double, 3> sign{1.0, 1.0, 1.0};

  static ImuAxes parse(std::string_view spec) {
    ImuAxes axes;
    auto parts = text::split(spec, ',');
    if (parts.size() != 3) throw InputError("--imu-axes needs three comma-separated axes");
    std::array<bool, 3> used{};
    for (int k = 0; k < 3; ++k) {
      std::string_view p = parts[k];
      double s = 1.0;
      if (!p.empty() && (p.front() == '-' || p.front() == '+')) {
        s = p.front() == '-' ? -1.0 : 1.0;
        p.remove_prefix(1);
      }
      if (p.size() != 1 || p[0] < 'x' || p[0] > 'z') throw InputError("bad axis '" + std::string(parts[k]) + "'");
      const int src = p[0] - 'x';
      if (used[src]) throw InputError("axis used twice in --imu-axes");
      used[src] = true;
      axes.source[k] = src;
      axes.sign[k] = s;
    }
    return axes;
  }

  Vec3 apply(const Vec3& raw) const {
    return {sign[0] * raw[source[0]], sign[1] * raw[source[1]], sign[2] * raw[source[2]]};
  }
};

struct ImuOptions {
  Micros time_offset = 0;  // added to IMU timestamps to align with events
  ImuAxes axes;
};

/// Linearly interpolated, bias-corrected rate at time t. Throws OutOfRange
/// outside the sample span.
inline Vec3 angular_rate_at(const std::vector<ImuSample>& samples, const ImuCalibration& cal,
                            Micros t, const ImuOptions& opt = {}) {
  if (samples.empty()) throw OutOfRange("no IMU samples");
  const Micros tq = t - opt.time_offset;
  if (tq < samples.front().t || tq > samples.back().t)
    throw OutOfRange("time " + std::to_string(t) + " us outside IMU span");
  auto it = std::lower_bound(samples.begin(), samples.end(), tq,
                             [](const ImuSample& s, Micros v) { return s.t < v; });
  Vec3 raw;
  if (it->t == tq) {
    raw = it->omega;
  } else {
    const ImuSample& hi = *it;
    const ImuSample& lo = *(it - 1);
    const double f = static_cast<double>(tq - lo.t) / static_cast<double>(hi.t - lo.t);
    for (int k = 0; k < 3; ++k) raw[k] = lo.omega[k] + f * (hi.omega[k] - lo.omega[k]);
  }
  Vec3 out = opt.axes.apply(raw);
  const Vec3 bias = opt.axes.apply(cal.bias);
  for (int k = 0; k < 3; ++k) out[k] -= bias[k];
  return out;
}

/// Dense rotational ground-truth flow at t_eval.
inline FlowField ground_truth_flow(const std::vector<ImuSample>& samples, const ImuCalibration& cal,
                                   const SensorGeometry& g, Micros t_eval,
                                   const ImuOptions& opt = {}) {
  const Vec3 w = angular_rate_at(samples, cal, t_eval, opt);
  FlowField f;
  f.u = Grid<double>(g.width, g.height, 0.0);
  f.v = Grid<double>(g.width, g.height, 0.0);
  f.t_eval = t_eval;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      auto [u, v] = rotational_flow(w, g, x, y);
      f.u(x, y) = u;
      f.v(x, y) = v;
    }
  return f;
}

/// Ground truth at each estimate's own timestamp and pixel. Entries outside
/// the IMU span are dropped.
inline EventFlow ground_truth_events(const EventFlow& est, const std::vector<ImuSample>& samples,
                                     const ImuCalibration& cal, const SensorGeometry& g,
                                     const ImuOptions& opt = {}) {
  EventFlow out;
  for (const FlowEntry& e : est.entries) {
    const Micros tq = e.t - opt.time_offset;
    if (samples.empty() || tq < samples.front().t || tq > samples.back().t) continue;
    auto [u, v] = rotational_flow(angular_rate_at(samples, cal, e.t, opt), g, e.x, e.y);
    out.entries.push_back({e.t, e.x, e.y, u, v});
  }
  return out;
}

/// `t_us,wx,wy,wz` rows, rad/s.
inline std::vector<ImuSample> read_imu(std::istream& in) {
  std::vector<ImuSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = text::trim(line);
    if (row.empty()) continue;
    auto f = text::split(row, ',');
    ImuSample s;
    if (f.size() != 4 || !text::parse_number(f[0], s.t) || !text::parse_number(f[1], s.omega[0]) ||
        !text::parse_number(f[2], s.omega[1]) || !text::parse_number(f[3], s.omega[2]))
      throw ParseError("expected t_us,wx,wy,wz", lineno);
    if (!samples.empty() && s.t < samples.back().t)
      throw ParseError("IMU timestamps must be nondecreasing", lineno);
    samples.push_back(s);
  }
  return samples;
}

inline std::vector<ImuSample> read_imu(const std::string& path) {
  auto in = text::open_input(path);
  try {
    return read_imu(in);
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace distsurf
