#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "distsurf/error.hpp"
#include "distsurf/flow_solver.hpp"

namespace distsurf {

struct Velocity {
  double u = 0.0;
  double v = 0.0;
};

/// Planar angle between estimate and truth, degrees. A zero-length estimate
/// scores 90.
inline double angular_error(Velocity est, Velocity gt) {
  const double ne = std::hypot(est.u, est.v);
  const double ng = std::hypot(gt.u, gt.v);
  if (ne == 0.0 || ng == 0.0) return 90.0;
  const double c = std::clamp((est.u * gt.u + est.v * gt.v) / (ne * ng), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

/// Space-time angle between (u, v, 1) and (ug, vg, 1) with velocities
/// expressed per `time_unit_s` seconds.
inline double angular_error_3d(Velocity est, Velocity gt, double time_unit_s) {
  const double a[3] = {est.u * time_unit_s, est.v * time_unit_s, 1.0};
  const double b[3] = {gt.u * time_unit_s, gt.v * time_unit_s, 1.0};
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  return std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

/// 100 * |est - gt| / |gt|.
inline double relative_endpoint_error(Velocity est, Velocity gt) {
  return 100.0 * std::hypot(est.u - gt.u, est.v - gt.v) / std::hypot(gt.u, gt.v);
}

struct FlowErrorStats {
  double aae_deg = 0.0;
  double aae_std = 0.0;
  double raee_pct = 0.0;
  double raee_std = 0.0;
  std::size_t n_events = 0;
  std::size_t n_excluded = 0;
};

struct MetricOptions {
  double floor_pps = 5.0;        // truth at or below this speed is excluded
  bool angle_3d = false;         // space-time angle instead of planar
  double time_unit_s = 0.005;    // for the space-time angle
  bool raee_ratio_of_sums = false;
};

/// Accumulates per-event errors. Standard deviations use population (N)
/// normalization.
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(MetricOptions opt = {}) : opt_(opt) {}

  void add(Velocity est, Velocity gt) {
    if (std::hypot(gt.u, gt.v) <= opt_.floor_pps) {
      ++excluded_;
      return;
    }
    angles_.push_back(opt_.angle_3d ? angular_error_3d(est, gt, opt_.time_unit_s)
                                    : angular_error(est, gt));
    raee_.push_back(relative_endpoint_error(est, gt));
    err_sum_ += std::hypot(est.u - gt.u, est.v - gt.v);
    gt_sum_ += std::hypot(gt.u, gt.v);
  }

  void add_excluded(std::size_t n) { excluded_ += n; }

  FlowErrorStats stats() const {
    if (angles_.empty()) throw NoOverlap();
    FlowErrorStats s;
    std::tie(s.aae_deg, s.aae_std) = mean_std(angles_);
    std::tie(s.raee_pct, s.raee_std) = mean_std(raee_);
    if (opt_.raee_ratio_of_sums) s.raee_pct = 100.0 * err_sum_ / gt_sum_;
    s.n_events = angles_.size();
    s.n_excluded = excluded_;
    return s;
  }

 private:
  static std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
  }

  MetricOptions opt_;
  std::vector<double> angles_;
  std::vector<double> raee_;
  double err_sum_ = 0.0;
  double gt_sum_ = 0.0;
  std::size_t excluded_ = 0;
};

/// Joins estimate and truth on (t, x, y). Duplicated keys pair up in order.
/// Throws NoOverlap when nothing is evaluable.
inline FlowErrorStats evaluate(const EventFlow& est, const EventFlow& gt,
                               const MetricOptions& opt = {}) {
  auto key_less = [](const FlowEntry& a, const FlowEntry& b) {
    return std::tie(a.t, a.y, a.x) < std::tie(b.t, b.y, b.x);
  };
  std::vector<FlowEntry> e = est.entries;
  std::vector<FlowEntry> g = gt.entries;
  std::stable_sort(e.begin(), e.end(), key_less);
  std::stable_sort(g.begin(), g.end(), key_less);
  ErrorAccumulator acc(opt);
  std::size_t i = 0, j = 0;
  while (i < e.size() && j < g.size()) {
    if (key_less(e[i], g[j])) {
      ++i;
    } else if (key_less(g[j], e[i])) {
      ++j;
    } else {
      acc.add({e[i].u, e[i].v}, {g[j].u, g[j].v});
      ++i;
      ++j;
    }
  }
  return acc.stats();
}

/// Compares each estimate with a dense truth field at its pixel.
inline FlowErrorStats evaluate(const EventFlow& est, const FlowField& gt,
                               const MetricOptions& opt = {}) {
  ErrorAccumulator acc(opt);
  for (const FlowEntry& e : est.entries) {
    if (!gt.u.contains(e.x, e.y)) continue;
    acc.add({e.u, e.v}, {gt.u(e.x, e.y), gt.v(e.x, e.y)});
  }
  return acc.stats();
}

struct ReportRow {
  std::string sequence;
  FlowErrorStats stats;
};

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "sequence,RAEE_pct,RAEE_std,AAE_deg,AAE_std,n,n_excluded\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    out << r.sequence << ',' << r.stats.raee_pct << ',' << r.stats.raee_std << ','
        << r.stats.aae_deg << ',' << r.stats.aae_std << ',' << r.stats.n_events << ','
        << r.stats.n_excluded << '\n';
}

inline void write_report_text(std::ostream& out, const std::vector<ReportRow>& rows) {
  std::size_t name_w = 8;
  for (const auto& r : rows) name_w = std::max(name_w, r.sequence.size());
  out << std::left << std::setw(static_cast<int>(name_w)) << "sequence" << std::right
      << std::setw(10) << "RAEE[%]" << std::setw(10) << "+-" << std::setw(10) << "AAE[deg]"
      << std::setw(10) << "+-" << std::setw(10) << "n" << std::setw(12) << "excluded" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows)
    out << std::left << std::setw(static_cast<int>(name_w)) << r.sequence << std::right
        << std::setw(10) << r.stats.raee_pct << std::setw(10) << r.stats.raee_std
        << std::setw(10) << r.stats.aae_deg << std::setw(10) << r.stats.aae_std
        << std::setw(10) << r.stats.n_events << std::setw(12) << r.stats.n_excluded << '\n';
}

}  // namespace distsurf
