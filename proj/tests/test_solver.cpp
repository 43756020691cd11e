#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace distsurf;

namespace {

EventWindow window_of(int w, int h, const std::vector<Pixel>& pixels, Micros t = 0) {
  std::vector<std::pair<Pixel, Micros>> hits;
  for (const Pixel& p : pixels) hits.push_back({p, t});
  return EventWindow::from_pixels(w, h, hits, 5000, 5000);
}

// Full-rank random derivatives: each pixel pins the flow on its own, so
// boundary influence decays within a few pixels.
DerivativeField random_field(std::mt19937_64& rng, int w, int h) {
  std::normal_distribution<double> n(0.0, 1.0);
  DerivativeField f{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), 0, 5000};
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    const double a = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);
    f.dx[i] = std::cos(a);
    f.dy[i] = std::sin(a);
    f.dt[i] = 100.0 * n(rng);
  }
  return f;
}

DerivativeField crop(const DerivativeField& f, int x0, int y0, int w, int h) {
  DerivativeField c{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), f.t_eval,
                    f.delta_t};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      c.dx(x, y) = f.dx(x + x0, y + y0);
      c.dy(x, y) = f.dy(x + x0, y + y0);
      c.dt(x, y) = f.dt(x + x0, y + y0);
    }
  return c;
}

double total_variation(const FlowField& f) {
  double tv = 0.0;
  for (int y = 0; y + 1 < f.height(); ++y)
    for (int x = 0; x + 1 < f.width(); ++x)
      tv += std::hypot(f.u(x + 1, y) - f.u(x, y), f.u(x, y + 1) - f.u(x, y)) +
            std::hypot(f.v(x + 1, y) - f.v(x, y), f.v(x, y + 1) - f.v(x, y));
  return tv;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Lorentzian, Examples) {
  for (double sigma : {0.1, 1.0, 7.5}) {
    EXPECT_EQ(lorentzian(0.0, sigma), 0.0);
    EXPECT_NEAR(lorentzian(sigma * std::sqrt(2.0), sigma), std::log(2.0), 1e-15);
  }
}

TEST(Lorentzian, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> rr(-5.0, 5.0), rs(0.2, 3.0);
  for (int k = 0; k < 20; ++k) {
    const double r = rr(rng), sigma = rs(rng), h = 1e-6;
    const double fd = (lorentzian(r + h, sigma) - lorentzian(r - h, sigma)) / (2 * h);
    const double an = lorentzian_derivative(r, sigma);
    EXPECT_NEAR(an, fd, 1e-6 * std::max(std::abs(fd), 1e-3)) << "r=" << r << " sigma=" << sigma;
    EXPECT_NEAR(lorentzian_weight(r, sigma) * r, an, 1e-14);
  }
}

TEST(SolverConfig, RejectsInvalid) {
  SolverConfig c;
  c.lambda = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.sigma = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.inner_iters = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Solve, StaticSceneGivesZeroFlow) {
  std::mt19937_64 rng(1);
  auto f = random_field(rng, 24, 20);
  for (auto& v : f.dt) v = 0.0;
  auto flow = solve(f);
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    EXPECT_EQ(flow.u[i], 0.0);
    EXPECT_EQ(flow.v[i], 0.0);
  }
}

TEST(Solve, RejectsNonFiniteInput) {
  std::mt19937_64 rng(1);
  auto f = random_field(rng, 8, 8);
  f.dt(3, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve(f), NonFiniteInput);
}

TEST(Solve, RejectsMismatchedMask) {
  std::mt19937_64 rng(1);
  auto f = random_field(rng, 8, 8);
  EXPECT_THROW(solve(f, {}, Grid<std::uint8_t>(7, 8, 1)), std::invalid_argument);
}

TEST(Solve, VerticalLineMovingTwoPixels) {
  const int w = 64, h = 64;
  std::vector<Pixel> before, after;
  for (int y = 0; y < h; ++y) {
    before.push_back({30, y});
    after.push_back({32, y});
  }
  SensorGeometry g;
  g.width = w;
  g.height = h;
  auto s0 = transform(window_of(w, h, before), g);
  auto s1 = transform(window_of(w, h, after), g);
  auto field = derivative_field(s0, s1, 5000, 5000);
  auto mask = boundary_mask(w, h, 2);
  apply_gradient_gate(field, spatial_gradient(s1), 0.1, mask);
  auto flow = solve(field, {}, mask);
  std::vector<double> us, vs;
  for (int y = 0; y < h; ++y)
    for (int x = 20; x <= 40; ++x) {
      us.push_back(flow.u(x, y));
      vs.push_back(std::abs(flow.v(x, y)));
    }
  const double mu = median(us), mv = median(vs);
  EXPECT_GE(mu, 320.0);
  EXPECT_LE(mu, 480.0);
  EXPECT_LT(mv, 80.0);
}

TEST(Energy, AnalyticGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ru(-2.0, 2.0), rw(0.0, 1.0);
  for (double alpha : {0.0, 0.5, 1.0}) {
    for (int point = 0; point < 10; ++point) {
      auto f = random_field(rng, 16, 16);
      auto p = make_problem(f, {}, {});
      for (auto& wgt : p.weight) wgt = rw(rng);
      Grid<double> a(16, 16), b(16, 16);
      for (auto& v : a) v = ru(rng);
      for (auto& v : b) v = ru(rng);
      Grid<double> ga, gb;
      p.gradient(a, b, alpha, ga, gb);
      // every coordinate of both unknowns
      for (int which = 0; which < 2; ++which) {
        Grid<double>& x = which == 0 ? a : b;
        const Grid<double>& g = which == 0 ? ga : gb;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double h = 1e-6, x0 = x[i];
          x[i] = x0 + h;
          const double ep = p.energy(a, b, alpha);
          x[i] = x0 - h;
          const double em = p.energy(a, b, alpha);
          x[i] = x0;
          const double fd = (ep - em) / (2 * h);
          ASSERT_NEAR(g[i], fd, 1e-5 * std::max(std::abs(fd), 1.0))
              << "alpha " << alpha << " point " << point << " index " << i;
        }
      }
    }
  }
}

TEST(Energy, NonincreasingWithinEachStage) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    auto f = random_field(rng, 32, 32);
    // heavy-tailed outliers make the Lorentzian stages non-trivial
    std::uniform_int_distribution<std::size_t> ri(0, f.dt.size() - 1);
    for (int j = 0; j < 40; ++j) f.dt[ri(rng)] = 5000.0;
    SolverConfig cfg;
    cfg.convergence_tol = 0.0;
    auto flow = solve(f, cfg);
    const auto& tr = flow.energy_trace;
    ASSERT_GE(tr.size(), static_cast<std::size_t>(2 * cfg.gnc_stages));
    for (std::size_t i = 1; i < tr.size(); ++i) {
      if (tr[i].stage != tr[i - 1].stage) continue;
      EXPECT_LE(tr[i].energy, tr[i - 1].energy * (1.0 + 1e-9))
          << "stage " << tr[i].stage << " iteration " << tr[i].iteration;
    }
    for (const auto& s : tr) EXPECT_TRUE(std::isfinite(s.energy));
  }
}

TEST(Solve, LargerLambdaIsSmoother) {
  std::mt19937_64 rng(12);
  auto f = random_field(rng, 40, 40);
  SolverConfig lo, hi;
  hi.lambda = lo.lambda * 10.0;
  EXPECT_LT(total_variation(solve(f, hi)), total_variation(solve(f, lo)));
}

TEST(Solve, TranslationEquivariant) {
  std::mt19937_64 rng(2024);
  const int big = 80, n = 64;
  auto f = random_field(rng, big, big);
  SolverConfig cfg;
  cfg.convergence_tol = 1e-12;
  for (auto [sx, sy] : {std::pair{3, 0}, {0, 5}, {7, 2}, {4, 11}}) {
    auto fa = solve(crop(f, 0, 0, n, n), cfg);
    auto fb = solve(crop(f, sx, sy, n, n), cfg);
    // pixel (x, y) of b sees what (x + sx, y + sy) of a sees. Boundary
    // influence falls ~200x per 4 px here, so 16 px counts as interior.
    const int margin = 16;
    double worst = 0.0;
    for (int y = margin; y < n - margin - sy; ++y)
      for (int x = margin; x < n - margin - sx; ++x) {
        const double ua = fa.u(x + sx, y + sy), va = fa.v(x + sx, y + sy);
        const double scale = std::max({std::abs(ua), std::abs(va), 1.0});
        worst = std::max({worst, std::abs(fb.u(x, y) - ua) / scale, std::abs(fb.v(x, y) - va) / scale});
      }
    EXPECT_LE(worst, 1e-6) << "shift " << sx << "," << sy;
  }
}

TEST(Solve, OutputIsFiniteAndInPixelsPerSecond) {
  // uniform translation by one pixel per window in x on a full-rank field
  const int w = 20, h = 20;
  DerivativeField f{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), 0, 5000};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ra(0, 2 * std::numbers::pi);
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    const double a = ra(rng);
    f.dx[i] = std::cos(a);
    f.dy[i] = std::sin(a);
    f.dt[i] = -f.dx[i] * 200.0;  // V = (200, 0) px/s
  }
  auto flow = solve(f);
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    ASSERT_TRUE(std::isfinite(flow.u[i]) && std::isfinite(flow.v[i]));
    EXPECT_NEAR(flow.u[i], 200.0, 1.0);
    EXPECT_NEAR(flow.v[i], 0.0, 1.0);
  }
}

TEST(SampleAtEvents, UniformFlow) {
  FlowField f;
  f.u = Grid<double>(10, 10, 3.5);
  f.v = Grid<double>(10, 10, -1.25);
  auto w = window_of(10, 10, {{1, 2}, {7, 7}, {0, 9}}, 100);
  auto ev = sample_at_events(f, w);
  ASSERT_EQ(ev.size(), 3u);
  for (const auto& e : ev.entries) {
    EXPECT_EQ(e.u, 3.5);
    EXPECT_EQ(e.v, -1.25);
    EXPECT_EQ(e.t, 100);
  }
}

TEST(SampleAtEvents, EmptyWindow) {
  FlowField f;
  f.u = Grid<double>(4, 4, 1.0);
  f.v = Grid<double>(4, 4, 1.0);
  EXPECT_TRUE(sample_at_events(f, window_of(4, 4, {})).empty());
}

TEST(SampleAtEvents, MatchesDirectLookup) {
  std::mt19937_64 rng(90);
  auto s = oracle::random_stream(rng, 30, 20, 800, 10000);
  FlowField f;
  f.u = Grid<double>(30, 20, 0.0);
  f.v = Grid<double>(30, 20, 0.0);
  std::normal_distribution<double> n(0, 100);
  for (auto& x : f.u) x = n(rng);
  for (auto& x : f.v) x = n(rng);
  auto w = window_at(s, 8000, 5000);
  auto ev = sample_at_events(f, w);
  std::size_t expected = 0;
  for (const auto& e : s.events) expected += (e.t >= 3000 && e.t < 8000);
  ASSERT_EQ(ev.size(), expected);
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const auto& e = ev.entries[k];
    EXPECT_EQ(e.u, f.u(e.x, e.y));
    EXPECT_EQ(e.v, f.v(e.x, e.y));
    if (k > 0) {
      EXPECT_LE(ev.entries[k - 1].t, e.t);
    }
  }
}
