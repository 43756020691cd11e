#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "distsurf/denoise.hpp"
#include "distsurf/derivatives.hpp"
#include "distsurf/distance_transform.hpp"
#include "distsurf/error.hpp"
#include "distsurf/event_io.hpp"
#include "distsurf/events.hpp"
#include "distsurf/flow_solver.hpp"

namespace distsurf {

struct PipelineConfig {
  Micros delta_t_us = kDefaultWindowUs;
  Micros tau_us = 5000;
  Micros stride_us = 0;  // 0 means stride == delta_t (non-overlapping cadence)
  Micros t_start_us = -1;  // -1: first timestamp rounded up to delta_t
  int boundary_margin_px = 2;
  double gradient_gate = 0.1;  // see apply_gradient_gate; 0 disables
  bool denoise = true;
  bool warm_start = false;
  bool write_dense = false;
  int threads = 1;
  SolverConfig solver;

  Micros stride() const { return stride_us > 0 ? stride_us : delta_t_us; }

  void validate() const {
    if (delta_t_us <= 0 || tau_us <= 0 || stride_us < 0)
      throw InputError("durations must be positive");
    if (boundary_margin_px < 0) throw InputError("boundary_margin_px must be >= 0");
    if (!(gradient_gate >= 0.0)) throw InputError("gradient_gate must be >= 0");
    if (threads < 1) throw InputError("threads must be >= 1");
    try {
      solver.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
};

/// Flat `key=value` form; keys match the CLI flag names.
inline void write_config(std::ostream& out, const PipelineConfig& c) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "delta_t_us=" << c.delta_t_us << '\n'
      << "tau_us=" << c.tau_us << '\n'
      << "stride_us=" << c.stride_us << '\n'
      << "t_start_us=" << c.t_start_us << '\n'
      << "boundary_margin_px=" << c.boundary_margin_px << '\n'
      << "gradient_gate=" << text::format_double(c.gradient_gate) << '\n'
      << "denoise=" << b(c.denoise) << '\n'
      << "warm_start=" << b(c.warm_start) << '\n'
      << "write_dense=" << b(c.write_dense) << '\n'
      << "threads=" << c.threads << '\n'
      << "lambda=" << text::format_double(c.solver.lambda) << '\n'
      << "sigma=" << text::format_double(c.solver.sigma) << '\n'
      << "outer_iters=" << c.solver.outer_iters << '\n'
      << "inner_iters=" << c.solver.inner_iters << '\n'
      << "gnc_stages=" << c.solver.gnc_stages << '\n'
      << "convergence_tol=" << text::format_double(c.solver.convergence_tol) << '\n';
}

/// Applies one key. Throws InputError for unknown keys or bad values.
inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  auto num = [&](auto& out) {
    if (!text::parse_number(value, out))
      throw InputError("bad value '" + value + "' for config key '" + key + "'");
  };
  auto flag = [&](bool& out) {
    if (value == "true" || value == "1") out = true;
    else if (value == "false" || value == "0") out = false;
    else throw InputError("bad boolean '" + value + "' for config key '" + key + "'");
  };
  if (key == "delta_t_us") num(c.delta_t_us);
  else if (key == "tau_us") num(c.tau_us);
  else if (key == "stride_us") num(c.stride_us);
  else if (key == "t_start_us") num(c.t_start_us);
  else if (key == "boundary_margin_px") num(c.boundary_margin_px);
  else if (key == "gradient_gate") num(c.gradient_gate);
  else if (key == "denoise") flag(c.denoise);
  else if (key == "warm_start") flag(c.warm_start);
  else if (key == "write_dense") flag(c.write_dense);
  else if (key == "threads") num(c.threads);
  else if (key == "lambda") num(c.solver.lambda);
  else if (key == "sigma") num(c.solver.sigma);
  else if (key == "outer_iters") num(c.solver.outer_iters);
  else if (key == "inner_iters") num(c.solver.inner_iters);
  else if (key == "gnc_stages") num(c.solver.gnc_stages);
  else if (key == "convergence_tol") num(c.solver.convergence_tol);
  else throw InputError("unknown config key '" + key + "'");
}

inline std::vector<std::string> config_keys() {
  std::ostringstream ss;
  write_config(ss, PipelineConfig{});
  std::istringstream in(ss.str());
  std::vector<std::string> keys;
  for (const auto& [k, v] : read_key_values(in)) keys.push_back(k);
  return keys;
}

inline PipelineConfig read_config(std::istream& in, PipelineConfig base = {}) {
  for (const auto& [k, v] : read_key_values(in)) set_config_value(base, k, v);
  base.validate();
  return base;
}

struct StageTimes {
  double window_s = 0.0;
  double transform_s = 0.0;
  double derivative_s = 0.0;
  double solver_s = 0.0;

  double distsurf_s() const { return window_s + transform_s + derivative_s; }
};

struct WindowResult {
  Micros t_eval = 0;
  bool skipped = false;
  std::string notice;
  EventFlow events;
  std::optional<FlowField> dense;
  StageTimes times;
};

struct FlowRun {
  std::vector<WindowResult> windows;
  double classify_s = 0.0;

  EventFlow all_events() const {
    EventFlow out;
    for (const auto& w : windows)
      out.entries.insert(out.entries.end(), w.events.entries.begin(), w.events.entries.end());
    return out;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace detail

/// Windows -> distance surfaces -> derivatives -> solve -> sample, for one
/// evaluation time. Empty windows produce a skipped result. `init` seeds the
/// solver (px/s) when warm starting.
inline WindowResult process_window(const EventStream& stream, const std::vector<NoiseClass>& classes,
                                   Micros t_eval, const PipelineConfig& cfg,
                                   const FlowField* init = nullptr) {
  WindowResult res;
  res.t_eval = t_eval;
  const auto& g = stream.geometry;
  try {
    auto t0 = detail::Clock::now();
    auto [before, after] = cfg.denoise ? denoised_window_pair(stream, classes, t_eval, cfg.delta_t_us)
                                       : window_pair(stream, t_eval, cfg.delta_t_us);
    res.times.window_s = detail::seconds_since(t0);
    if (before.empty() || after.empty()) {
      res.skipped = true;
      res.notice = before.empty() ? "empty window before t" : "empty window after t";
      return res;
    }
    t0 = detail::Clock::now();
    const DistanceSurface s_before = transform(before, g);
    const DistanceSurface s_after = transform(after, g);
    res.times.transform_s = detail::seconds_since(t0);

    t0 = detail::Clock::now();
    const DerivativeField field = derivative_field(s_before, s_after, t_eval, cfg.delta_t_us);
    auto mask = boundary_mask(g.width, g.height, cfg.boundary_margin_px);
    if (cfg.gradient_gate > 0.0)
      apply_gradient_gate(field, spatial_gradient(s_after), cfg.gradient_gate, mask);
    res.times.derivative_s = detail::seconds_since(t0);

    t0 = detail::Clock::now();
    FlowField flow;
    if (init != nullptr) {
      const FlowProblem problem = make_problem(field, cfg.solver, mask);
      const double s = micros_to_seconds(cfg.delta_t_us);
      Grid<double> a = init->u, b = init->v;
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] *= s;
        b[i] *= s;
      }
      flow.energy_trace = minimize(problem, cfg.solver, a, b);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] /= s;
        b[i] /= s;
      }
      flow.u = std::move(a);
      flow.v = std::move(b);
      flow.t_eval = t_eval;
    } else {
      flow = solve(field, cfg.solver, mask);
    }
    res.times.solver_s = detail::seconds_since(t0);

    res.events = sample_at_events(flow, before);
    if (cfg.write_dense || cfg.warm_start) res.dense = std::move(flow);
  } catch (const NumericalError& e) {
    throw NumericalError("window t=" + std::to_string(t_eval) + " us: " + e.what());
  } catch (const InputError& e) {
    throw InputError("window t=" + std::to_string(t_eval) + " us: " + e.what());
  }
  return res;
}

/// Runs every evaluation time of the stream. Windows are distributed over
/// cfg.threads workers; results come back in window order and do not depend
/// on the thread count. Warm starting forces sequential processing.
inline FlowRun run_flow(const EventStream& stream, const PipelineConfig& cfg) {
  cfg.validate();
  FlowRun run;
  std::vector<NoiseClass> classes;
  auto t0 = detail::Clock::now();
  if (cfg.denoise) classes = classify(stream, DenoiseConfig{cfg.tau_us});
  run.classify_s = detail::seconds_since(t0);

  const auto times = evaluation_times(
      stream, cfg.delta_t_us, cfg.stride(),
      cfg.t_start_us >= 0 ? std::optional<Micros>(cfg.t_start_us) : std::nullopt);
  run.windows.resize(times.size());

  if (cfg.warm_start) {
    const FlowField* prev = nullptr;
    for (std::size_t k = 0; k < times.size(); ++k) {
      run.windows[k] = process_window(stream, classes, times[k], cfg, prev);
      if (run.windows[k].dense) prev = &*run.windows[k].dense;
    }
    if (!cfg.write_dense)
      for (auto& w : run.windows) w.dense.reset();
    return run;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= times.size()) return;
      try {
        run.windows[k] = process_window(stream, classes, times[k], cfg);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(times.size());
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(times.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return run;
}

/// One line per window plus totals, splitting distance-surface stages
/// (denoise, windowing, transform, derivatives) from the solver.
inline void write_timing(std::ostream& out, const FlowRun& run) {
  out << "t_eval_us,skipped,window_ms,transform_ms,derivative_ms,distsurf_ms,solver_ms\n";
  double distsurf = 0.0, solver = 0.0;
  std::size_t n = 0;
  for (const auto& w : run.windows) {
    out << w.t_eval << ',' << (w.skipped ? 1 : 0) << ',' << w.times.window_s * 1e3 << ','
        << w.times.transform_s * 1e3 << ',' << w.times.derivative_s * 1e3 << ','
        << w.times.distsurf_s() * 1e3 << ',' << w.times.solver_s * 1e3 << '\n';
    if (!w.skipped) {
      distsurf += w.times.distsurf_s();
      solver += w.times.solver_s;
      ++n;
    }
  }
  out << "# classify_ms=" << run.classify_s * 1e3 << " windows=" << n;
  if (n > 0)
    out << " mean_distsurf_ms=" << (distsurf / n + run.classify_s / n) * 1e3
        << " mean_solver_ms=" << solver / n * 1e3;
  out << '\n';
}

}  // namespace distsurf
