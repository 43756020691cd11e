#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace distsurf;

namespace {

SimResult square_scene(Micros duration = 30000) {
  SensorGeometry g;
  g.width = 64;
  g.height = 64;
  g.fx = g.fy = 100;
  g.cx = g.cy = 32;
  ScenePattern p;
  p.contrast = std::exp(1.5);
  p.center_x = 24;
  p.center_y = 32;
  p.size_x = 20;
  SimConfig c;
  c.duration = duration;
  c.noise = {0.1, 0.001};
  return simulate(p, g, c);
}

std::string csv_of(const EventFlow& f) {
  std::ostringstream out;
  write_event_flow(out, f);
  return out.str();
}

}  // namespace

TEST(Config, RoundTrip) {
  PipelineConfig c;
  c.delta_t_us = 2500;
  c.tau_us = 7000;
  c.gradient_gate = 0.25;
  c.denoise = false;
  c.threads = 3;
  c.solver.lambda = 0.35;
  c.solver.sigma = 0.5;
  c.solver.gnc_stages = 4;
  std::ostringstream out;
  write_config(out, c);
  std::istringstream in(out.str());
  auto r = read_config(in);
  std::ostringstream again;
  write_config(again, r);
  EXPECT_EQ(again.str(), out.str());
  EXPECT_EQ(r.delta_t_us, 2500);
  EXPECT_EQ(r.solver.lambda, 0.35);
  EXPECT_FALSE(r.denoise);
}

TEST(Config, KeysCoverEverySetting) {
  PipelineConfig c;
  for (const auto& k : config_keys()) {
    const bool boolean = k == "denoise" || k == "warm_start" || k == "write_dense";
    EXPECT_NO_THROW(set_config_value(c, k, boolean ? "true" : "1")) << k;
  }
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  PipelineConfig c;
  EXPECT_THROW(set_config_value(c, "lamda", "0.1"), InputError);
  EXPECT_THROW(set_config_value(c, "lambda", "abc"), InputError);
  EXPECT_THROW(set_config_value(c, "denoise", "maybe"), InputError);
  std::istringstream neg("lambda=-1\n");
  EXPECT_THROW(read_config(neg), InputError);
  std::istringstream gate("gradient_gate=-0.5\n");
  EXPECT_THROW(read_config(gate), InputError);
}

TEST(RunFlow, ParallelMatchesSerialExactly) {
  auto sim = square_scene(40000);
  PipelineConfig serial;
  PipelineConfig parallel = serial;
  parallel.threads = 4;
  auto a = run_flow(sim.stream, serial);
  auto b = run_flow(sim.stream, parallel);
  ASSERT_FALSE(a.all_events().empty());
  EXPECT_EQ(csv_of(a.all_events()), csv_of(b.all_events()));
}

TEST(RunFlow, EstimatesOnlyAtWindowEvents) {
  auto sim = square_scene();
  PipelineConfig cfg;
  auto run = run_flow(sim.stream, cfg);
  const auto classes = classify(sim.stream, {cfg.tau_us});
  for (const auto& w : run.windows) {
    if (w.skipped) continue;
    auto win = denoised_window(sim.stream, classes, w.t_eval, cfg.delta_t_us);
    std::size_t n = 0;
    for (const auto& v : win.per_pixel_events) n += v.size();
    EXPECT_EQ(w.events.size(), n);
    for (const auto& e : w.events.entries) {
      EXPECT_TRUE(win.contains({e.x, e.y}));
      EXPECT_GE(e.t, w.t_eval - cfg.delta_t_us);
      EXPECT_LT(e.t, w.t_eval);
    }
  }
}

TEST(RunFlow, SkipsEmptyWindows) {
  EventStream s;
  s.geometry.width = 32;
  s.geometry.height = 32;
  // a line at t in [0, 5000) and nothing after
  for (int y = 0; y < 32; ++y) s.events.push_back({static_cast<Micros>(100 * y), 10, y, 1});
  s.events.push_back({20000, 3, 3, 1});
  PipelineConfig cfg;
  cfg.denoise = false;
  auto run = run_flow(s, cfg);
  ASSERT_FALSE(run.windows.empty());
  bool saw_skip = false;
  for (const auto& w : run.windows)
    if (w.skipped) {
      saw_skip = true;
      EXPECT_FALSE(w.notice.empty());
      EXPECT_TRUE(w.events.empty());
    }
  EXPECT_TRUE(saw_skip);
}

TEST(RunFlow, WarmStartAndDenseOutput) {
  auto sim = square_scene();
  PipelineConfig cfg;
  cfg.warm_start = true;
  auto run = run_flow(sim.stream, cfg);
  for (const auto& w : run.windows) EXPECT_FALSE(w.dense.has_value());
  cfg.write_dense = true;
  run = run_flow(sim.stream, cfg);
  for (const auto& w : run.windows)
    if (!w.skipped) {
      ASSERT_TRUE(w.dense.has_value());
      EXPECT_EQ(w.dense->width(), 64);
    }
}

TEST(RunFlow, TimingReport) {
  auto sim = square_scene();
  auto run = run_flow(sim.stream, {});
  std::ostringstream out;
  write_timing(out, run);
  const auto text = out.str();
  EXPECT_EQ(text.rfind("t_eval_us,skipped,", 0), 0u);
  EXPECT_NE(text.find("mean_distsurf_ms="), std::string::npos);
}

TEST(FlowIo, EventCsvRoundTrip) {
  EventFlow f;
  f.entries = {{0, 1, 2, 200.5, -0.125}, {7, 3, 4, 1e-7, 12345.678}};
  std::istringstream in(csv_of(f));
  auto r = read_event_flow(in);
  EXPECT_EQ(r.entries, f.entries);
  std::istringstream bad("t_us,x,y,u_pps,v_pps\n1,2,3\n");
  EXPECT_THROW(read_event_flow(bad), ParseError);
}

TEST(FlowIo, FloRoundTrip) {
  Grid<double> u(5, 3, 0.0), v(5, 3, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = 0.5 * static_cast<double>(i);
    v[i] = -0.25 * static_cast<double>(i);
  }
  std::stringstream buf;
  write_flo(buf, u, v);
  const auto bytes = buf.str();
  ASSERT_EQ(bytes.size(), 12u + 8u * 15u);
  EXPECT_EQ(bytes.substr(0, 4), "PIEH");
  auto f = read_flo(buf);
  EXPECT_EQ(f.u, u);
  EXPECT_EQ(f.v, v);
  std::istringstream junk("NOPE");
  EXPECT_THROW(read_flo(junk), InputError);
}

TEST(FlowIo, GridDumpRoundTrip) {
  Grid<double> g(4, 6, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sqrt(static_cast<double>(i));
  std::stringstream buf;
  write_grid(buf, g);
  EXPECT_EQ(buf.str().size(), 12u + 8u * 24u);
  EXPECT_EQ(read_grid(buf), g);
}

TEST(FlowIo, PpmRoundTrip) {
  Grid<Rgb> img(3, 2);
  img(0, 0) = {255, 0, 0};
  img(2, 1) = {1, 2, 3};
  std::stringstream buf;
  write_ppm(buf, img);
  EXPECT_EQ(read_ppm(buf), img);
}

TEST(Render, ZeroFlowIsMidGray) {
  Grid<double> z(4, 4, 0.0);
  auto img = render_flow(z, z);
  for (const auto& c : img) EXPECT_EQ(c, (Rgb{128, 128, 128}));
}

TEST(Render, UniformFlowIsUniformColour) {
  Grid<double> u(6, 6, 3.0), v(6, 6, -4.0);
  auto img = render_flow(u, v);
  for (const auto& c : img) EXPECT_EQ(c, img[0]);
  EXPECT_NE(img[0], (Rgb{128, 128, 128}));
}

TEST(Render, HueFollowsDirection) {
  Grid<double> u(2, 1, 0.0), v(2, 1, 0.0);
  u(0, 0) = 1.0;   // +x: red
  u(1, 0) = -1.0;  // -x: cyan
  auto img = render_flow(u, v);
  EXPECT_EQ(img(0, 0), (Rgb{255, 0, 0}));
  EXPECT_EQ(img(1, 0), (Rgb{0, 255, 255}));
}

TEST(Render, ArrowsStayInsideTheImage) {
  Grid<Rgb> img(16, 16, Rgb{255, 255, 255});
  EventFlow f;
  f.entries = {{0, 0, 0, -100, -100}, {0, 15, 15, 100, 100}, {0, 8, 8, 50, 0}};
  draw_event_arrows(img, f, 8.0);
  EXPECT_EQ(img(8, 8), (Rgb{0, 0, 0}));
  EXPECT_EQ(img(10, 8), (Rgb{0, 0, 0}));  // 50 of a 141 px/s peak: about 3 px long
  EXPECT_EQ(img(13, 8), (Rgb{255, 255, 255}));
}
