#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace distsurf;

namespace {

SensorGeometry davis() { return SensorGeometry{346, 260, 223.0, 222.0, 173.5, 129.5}; }

std::vector<ImuSample> constant_rate(Vec3 w, Micros t0, Micros t1, Micros step) {
  std::vector<ImuSample> s;
  for (Micros t = t0; t <= t1; t += step) s.push_back({t, w});
  return s;
}

}  // namespace

TEST(Calibrate, ConstantBias) {
  auto s = constant_rate({0.01, -0.02, 0.003}, 0, 3'000'000, 1000);
  auto c = calibrate(s);
  EXPECT_NEAR(c.bias[0], 0.01, 1e-12);
  EXPECT_NEAR(c.bias[1], -0.02, 1e-12);
  EXPECT_NEAR(c.bias[2], 0.003, 1e-12);
}

TEST(Calibrate, NoisyBiasWithinStatisticalBound) {
  std::mt19937_64 rng(55);
  const double sd = 0.05;
  std::normal_distribution<double> n(0.0, sd);
  std::vector<ImuSample> s;
  for (int k = 0; k < 1000; ++k) s.push_back({k * 3000, {0.1 + n(rng), n(rng), -0.2 + n(rng)}});
  auto c = calibrate(s);
  const double bound = 3.0 * sd / std::sqrt(1000.0);
  EXPECT_NEAR(c.bias[0], 0.1, bound);
  EXPECT_NEAR(c.bias[1], 0.0, bound);
  EXPECT_NEAR(c.bias[2], -0.2, bound);
}

TEST(Calibrate, UsesOnlyTheStationaryPrefix) {
  auto s = constant_rate({1, 1, 1}, 0, 1'000'000, 10000);
  auto moving = constant_rate({9, 9, 9}, 1'010'000, 2'000'000, 10000);
  s.insert(s.end(), moving.begin(), moving.end());
  auto c = calibrate(s, 1'000'000);
  EXPECT_DOUBLE_EQ(c.bias[0], 1.0);
}

TEST(Calibrate, TooFewSamples) {
  auto s = constant_rate({0, 0, 0}, 0, 4000, 1000);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_THROW(calibrate(s), InsufficientSamples);
  EXPECT_THROW(calibrate({}), InsufficientSamples);
}

TEST(RotationalFlow, Examples) {
  const auto g = davis();
  auto [u0, v0] = rotational_flow({0, 0, 0}, g, 10, 200);
  EXPECT_EQ(u0, 0.0);
  EXPECT_EQ(v0, 0.0);
  // pure yaw at the principal point moves the image by -fx * wy
  auto [u1, v1] = rotational_flow({0, 0.5, 0}, g, g.cx, g.cy);
  EXPECT_DOUBLE_EQ(u1, -g.fx * 0.5);
  EXPECT_DOUBLE_EQ(v1, 0.0);
  // pure roll about the optical axis rotates about the principal point
  auto [u2, v2] = rotational_flow({0, 0, 1.0}, g, g.cx + 10, g.cy);
  EXPECT_NEAR(u2, 0.0, 1e-12);
  EXPECT_NEAR(v2, -10.0 * g.fy / g.fx, 1e-12);
}

TEST(RotationalFlow, MatchesProjectionOracle) {
  const auto g = davis();
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> rw(-3.0, 3.0), rx(0, g.width - 1), ry(0, g.height - 1);
  for (int k = 0; k < 100; ++k) {
    const Vec3 w{rw(rng), rw(rng), rw(rng)};
    const double x = rx(rng), y = ry(rng);
    auto [u, v] = rotational_flow(w, g, x, y);
    auto [uo, vo] = oracle::projected_flow(w, g, x, y);
    const double err = std::hypot(u - uo, v - vo);
    EXPECT_LE(err, 0.005 * std::hypot(uo, vo)) << "draw " << k;
  }
}

TEST(RotationalFlow, LinearInOmega) {
  const auto g = davis();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> rw(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const Vec3 a{rw(rng), rw(rng), rw(rng)}, b{rw(rng), rw(rng), rw(rng)};
    const Vec3 sum{2 * a[0] + b[0], 2 * a[1] + b[1], 2 * a[2] + b[2]};
    auto [ua, va] = rotational_flow(a, g, 30, 70);
    auto [ub, vb] = rotational_flow(b, g, 30, 70);
    auto [us, vs] = rotational_flow(sum, g, 30, 70);
    EXPECT_NEAR(us, 2 * ua + ub, 1e-9);
    EXPECT_NEAR(vs, 2 * va + vb, 1e-9);
  }
}

TEST(AngularRate, InterpolatesAndRemovesBias) {
  std::vector<ImuSample> s{{0, {0, 0, 0}}, {1000, {1, 2, 3}}, {2000, {3, 2, 1}}};
  ImuCalibration cal;
  cal.bias = {0.5, 0.0, 0.0};
  auto exact = angular_rate_at(s, cal, 1000);
  EXPECT_DOUBLE_EQ(exact[0], 0.5);
  EXPECT_DOUBLE_EQ(exact[1], 2.0);
  auto mid = angular_rate_at(s, cal, 1500);
  EXPECT_DOUBLE_EQ(mid[0], 1.5);
  EXPECT_DOUBLE_EQ(mid[2], 2.0);
  EXPECT_THROW(angular_rate_at(s, cal, 2001), OutOfRange);
  EXPECT_THROW(angular_rate_at(s, cal, -1), OutOfRange);
}

TEST(AngularRate, TimeOffsetShiftsTheLookup) {
  std::vector<ImuSample> s{{0, {0, 0, 0}}, {1000, {10, 0, 0}}};
  ImuOptions opt;
  opt.time_offset = 500;
  EXPECT_DOUBLE_EQ(angular_rate_at(s, {}, 1000, opt)[0], 5.0);
  EXPECT_THROW(angular_rate_at(s, {}, 400, opt), OutOfRange);
}

TEST(ImuAxes, ParseAndApply) {
  auto a = ImuAxes::parse("y,-x,z");
  auto w = a.apply({1, 2, 3});
  EXPECT_EQ(w, (Vec3{2, -1, 3}));
  EXPECT_EQ(ImuAxes::parse("x,y,z").apply({1, 2, 3}), (Vec3{1, 2, 3}));
  EXPECT_THROW(ImuAxes::parse("x,x,z"), InputError);
  EXPECT_THROW(ImuAxes::parse("x,y"), InputError);
  EXPECT_THROW(ImuAxes::parse("x,y,w"), InputError);
}

TEST(GroundTruth, DenseAndPerEventAgree) {
  const auto g = davis();
  auto s = constant_rate({0.3, -0.1, 0.2}, 0, 100000, 1000);
  ImuCalibration cal;
  auto dense = ground_truth_flow(s, cal, g, 50000);
  EventFlow est;
  est.entries = {{50000, 10, 20, 0, 0}, {50000, 300, 200, 0, 0}, {200000, 1, 1, 0, 0}};
  auto per = ground_truth_events(est, s, cal, g);
  ASSERT_EQ(per.size(), 2u);  // the last one is outside the IMU span
  for (const auto& e : per.entries) {
    EXPECT_DOUBLE_EQ(e.u, dense.u(e.x, e.y));
    EXPECT_DOUBLE_EQ(e.v, dense.v(e.x, e.y));
  }
}

TEST(ReadImu, ParsesAndValidates) {
  std::istringstream ok("0,0.1,0.2,0.3\n1000,0.4,0.5,0.6\n");
  auto s = read_imu(ok);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].t, 1000);
  EXPECT_DOUBLE_EQ(s[1].omega[2], 0.6);
  std::istringstream bad("0,0.1,0.2\n");
  EXPECT_THROW(read_imu(bad), ParseError);
  std::istringstream backwards("10,0,0,0\n5,0,0,0\n");
  EXPECT_THROW(read_imu(backwards), ParseError);
}
