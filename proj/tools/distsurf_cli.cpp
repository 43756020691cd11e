// distsurf: per-event optical flow from DVS event streams.
//
//   distsurf flow     --events E.csv --geometry G.txt --out DIR [--config C] [--<key> V ...]
//   distsurf simulate --pattern translating_square --out DIR [scene/noise flags]
//   distsurf eval     --est flow.csv (--gt truth.csv | --imu imu.csv --geometry G.txt)
//   distsurf render   (--flo dense.flo | --flow flow.csv --geometry G.txt) --out img.ppm
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <distsurf/distsurf.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace distsurf;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

struct FlowArgs {
  std::string events, geometry, config, out;
  std::map<std::string, std::string> overrides;
  bool dump_classified = false;
};

struct SimArgs {
  std::string pattern = "translating_square", out;
  SensorGeometry geometry{128, 128, 100.0, 100.0, -1.0, -1.0};
  ScenePattern scene;
  SimConfig sim;
};

struct EvalArgs {
  std::string est, gt, imu, geometry, name = "sequence", report_csv, imu_axes = "x,y,z";
  Micros calib_window_us = 3'000'000;
  Micros time_offset_us = 0;
  MetricOptions metric;
};

struct RenderArgs {
  std::string flo, flow, geometry, out;
  double max_len = 8.0;
  std::size_t stride = 1;
};

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError("cannot create directory " + p.string() + ": " + ec.message());
}

int run_flow_command(const FlowArgs& a) {
  const auto geometry = read_geometry(a.geometry);
  PipelineConfig cfg;
  if (!a.config.empty()) {
    auto in = text::open_input(a.config);
    try {
      cfg = read_config(in);
    } catch (const ParseError& e) {
      throw InputError(a.config + ": " + e.what());
    }
  }
  for (const auto& [k, v] : a.overrides) set_config_value(cfg, k, v);
  cfg.validate();

  const auto stream = parse_events(a.events, geometry);
  const fs::path out(a.out);
  ensure_dir(out / "windows");
  if (cfg.write_dense) ensure_dir(out / "dense");

  if (a.dump_classified) {
    auto f = text::open_output((out / "events_classified.csv").string());
    write_classified(f, stream, classify(stream, DenoiseConfig{cfg.tau_us}));
  }
  {
    auto f = text::open_output((out / "config.txt").string());
    write_config(f, cfg);
  }

  const FlowRun run = run_flow(stream, cfg);
  for (const auto& w : run.windows) {
    if (w.skipped) {
      std::cerr << "window t=" << w.t_eval << " us skipped: " << w.notice << '\n';
      continue;
    }
    write_event_flow((out / "windows" / (std::to_string(w.t_eval) + ".csv")).string(), w.events);
    if (w.dense) write_flo((out / "dense" / (std::to_string(w.t_eval) + ".flo")).string(), *w.dense);
  }
  write_event_flow((out / "flow.csv").string(), run.all_events());
  {
    auto f = text::open_output((out / "timing.csv").string());
    write_timing(f, run);
  }
  std::ostringstream timing;
  write_timing(timing, run);
  const std::string t = timing.str();
  const auto last = t.rfind("# ");
  if (last != std::string::npos) std::cerr << t.substr(last);
  return 0;
}

int run_simulate_command(SimArgs a) {
  a.scene.kind = parse_pattern_kind(a.pattern);
  if (a.geometry.cx < 0) a.geometry.cx = a.geometry.width / 2.0;
  if (a.geometry.cy < 0) a.geometry.cy = a.geometry.height / 2.0;
  const SimResult r = simulate(a.scene, a.geometry, a.sim);
  const fs::path out(a.out);
  ensure_dir(out);
  write_events((out / "events.csv").string(), r.stream);
  write_geometry((out / "geometry.txt").string(), r.stream.geometry);
  write_event_flow((out / "truth.csv").string(), r.truth);
  std::cerr << r.stream.size() << " events, " << r.truth.size() << " with ground truth\n";
  return 0;
}

int run_eval_command(const EvalArgs& a) {
  const EventFlow est = read_event_flow(a.est);
  FlowErrorStats stats;
  if (!a.gt.empty()) {
    stats = evaluate(est, read_event_flow(a.gt), a.metric);
  } else {
    if (a.geometry.empty()) throw InputError("--imu needs --geometry");
    const auto g = read_geometry(a.geometry);
    const auto samples = read_imu(a.imu);
    ImuOptions opt;
    opt.time_offset = a.time_offset_us;
    opt.axes = ImuAxes::parse(a.imu_axes);
    const auto cal = calibrate(samples, a.calib_window_us);
    stats = evaluate(est, ground_truth_events(est, samples, cal, g, opt), a.metric);
  }
  const std::vector<ReportRow> rows{{a.name, stats}};
  write_report_text(std::cout, rows);
  if (!a.report_csv.empty()) {
    auto f = text::open_output(a.report_csv);
    write_report_csv(f, rows);
  }
  return 0;
}

int run_render_command(const RenderArgs& a) {
  Grid<Rgb> img;
  if (!a.flo.empty()) {
    const FlowField f = read_flo(a.flo);
    img = render_flow(f.u, f.v);
  }
  if (!a.flow.empty()) {
    const EventFlow flow = read_event_flow(a.flow);
    if (a.flo.empty()) {
      if (a.geometry.empty()) throw InputError("--flow without --flo needs --geometry");
      const auto g = read_geometry(a.geometry);
      img = Grid<Rgb>(g.width, g.height, Rgb{255, 255, 255});
    }
    for (const auto& e : flow.entries)
      if (!img.contains(e.x, e.y)) throw InputError("flow entry outside the image");
    draw_event_arrows(img, flow, a.max_len, a.stride);
  }
  if (a.flo.empty() && a.flow.empty()) throw InputError("render needs --flo and/or --flow");
  auto out = text::open_output(a.out);
  write_ppm(out, img);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-event optical flow from DVS event streams via distance surfaces"};
  app.require_subcommand(1);

  FlowArgs flow_args;
  auto* flow = app.add_subcommand("flow", "Estimate per-event flow for every evaluation window");
  flow->add_option("--events", flow_args.events, "Event CSV (t_us,x,y,p)")->required()->check(CLI::ExistingFile);
  flow->add_option("--geometry", flow_args.geometry, "Sensor geometry key=value file")
      ->required()
      ->check(CLI::ExistingFile);
  flow->add_option("--config", flow_args.config, "Pipeline config key=value file")->check(CLI::ExistingFile);
  flow->add_option("--out", flow_args.out, "Output directory")->required();
  flow->add_flag("--dump-classified", flow_args.dump_classified,
                 "Also write events_classified.csv with the noise class column");
  std::map<std::string, std::string> raw_overrides;
  for (const auto& key : config_keys()) {
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    flow->add_option_function<std::string>(
        names, [&raw_overrides, key](const std::string& v) { raw_overrides[key] = v; },
        "Override config key " + key);
  }

  SimArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Render a synthetic scene into events with ground truth");
  sim->add_option("--pattern", sim_args.pattern,
                  "translating_bar | translating_square | checkerboard | rotating_square | "
                  "two_objects_crossing")
      ->capture_default_str();
  sim->add_option("--out", sim_args.out, "Output directory")->required();
  sim->add_option("--width", sim_args.geometry.width)->capture_default_str();
  sim->add_option("--height", sim_args.geometry.height)->capture_default_str();
  sim->add_option("--fx", sim_args.geometry.fx)->capture_default_str();
  sim->add_option("--fy", sim_args.geometry.fy)->capture_default_str();
  sim->add_option("--cx", sim_args.geometry.cx, "Principal point x (default: image centre)");
  sim->add_option("--cy", sim_args.geometry.cy, "Principal point y (default: image centre)");
  sim->add_option("--contrast", sim_args.scene.contrast, "Object / background intensity")->capture_default_str();
  sim->add_option("--vx", sim_args.scene.vx, "px/s")->capture_default_str();
  sim->add_option("--vy", sim_args.scene.vy, "px/s")->capture_default_str();
  sim->add_option("--angular-rate", sim_args.scene.angular_rate, "rad/s")->capture_default_str();
  sim->add_option("--center-x", sim_args.scene.center_x)->capture_default_str();
  sim->add_option("--center-y", sim_args.scene.center_y)->capture_default_str();
  sim->add_option("--size-x", sim_args.scene.size_x)->capture_default_str();
  sim->add_option("--size-y", sim_args.scene.size_y)->capture_default_str();
  sim->add_option("--cell", sim_args.scene.cell, "Checkerboard cell size")->capture_default_str();
  sim->add_option("--offset-x", sim_args.scene.offset_x)->capture_default_str();
  sim->add_option("--offset-y", sim_args.scene.offset_y)->capture_default_str();
  sim->add_option("--ell", sim_args.sim.ell, "Log-intensity threshold")->capture_default_str();
  sim->add_option("--sample-dt-us", sim_args.sim.sample_dt)->capture_default_str();
  sim->add_option("--duration-us", sim_args.sim.duration)->capture_default_str();
  sim->add_option("--seed", sim_args.sim.seed)->capture_default_str();
  sim->add_option("--hole-fraction", sim_args.sim.noise.hole_fraction)->capture_default_str();
  sim->add_option("--false-event-rate", sim_args.sim.noise.false_event_rate,
                  "False events per pixel per noise window")
      ->capture_default_str();
  sim->add_option("--noise-window-us", sim_args.sim.noise_window)->capture_default_str();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score estimated flow against ground truth");
  eval->add_option("--est", eval_args.est, "Estimated flow CSV")->required()->check(CLI::ExistingFile);
  auto* gt = eval->add_option("--gt", eval_args.gt, "Ground-truth flow CSV")->check(CLI::ExistingFile);
  auto* imu = eval->add_option("--imu", eval_args.imu, "IMU CSV (t_us,wx,wy,wz)")->check(CLI::ExistingFile);
  gt->excludes(imu);
  eval->add_option("--geometry", eval_args.geometry, "Sensor geometry (with --imu)")->check(CLI::ExistingFile);
  eval->add_option("--calib-window-us", eval_args.calib_window_us, "Stationary prefix for gyro bias")
      ->capture_default_str();
  eval->add_option("--time-offset-us", eval_args.time_offset_us, "Added to IMU timestamps")
      ->capture_default_str();
  eval->add_option("--imu-axes", eval_args.imu_axes, "Gyro axes in camera frame, e.g. y,-x,z")
      ->capture_default_str();
  eval->add_option("--floor", eval_args.metric.floor_pps, "Exclude truth at or below this speed (px/s)")
      ->capture_default_str();
  eval->add_flag("--angle-3d", eval_args.metric.angle_3d, "Space-time angular error");
  eval->add_flag("--ratio-of-sums", eval_args.metric.raee_ratio_of_sums, "RAEE as a ratio of sums");
  eval->add_option("--name", eval_args.name, "Sequence name in the report")->capture_default_str();
  eval->add_option("--report-csv", eval_args.report_csv, "Also write the report as CSV");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "Draw dense flow and/or per-event arrows to PPM");
  render->add_option("--flo", render_args.flo, "Dense flow (.flo)")->check(CLI::ExistingFile);
  render->add_option("--flow", render_args.flow, "Per-event flow CSV for arrows")->check(CLI::ExistingFile);
  render->add_option("--geometry", render_args.geometry, "Canvas size when only --flow is given")
      ->check(CLI::ExistingFile);
  render->add_option("--out", render_args.out, "Output PPM")->required();
  render->add_option("--max-len", render_args.max_len, "Longest arrow in pixels")->capture_default_str();
  render->add_option("--stride", render_args.stride, "Draw every n-th arrow")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kInputError;
  }

  try {
    if (*flow) {
      flow_args.overrides = raw_overrides;
      return run_flow_command(flow_args);
    }
    if (*sim) return run_simulate_command(sim_args);
    if (*eval) {
      if (eval_args.gt.empty() && eval_args.imu.empty()) throw InputError("eval needs --gt or --imu");
      return run_eval_command(eval_args);
    }
    if (*render) return run_render_command(render_args);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  }
  return 0;
}
