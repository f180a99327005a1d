#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "svcalib/camera_model.hpp"
#include "svcalib/error.hpp"
#include "svcalib/synthetic.hpp"

using namespace svcalib;

namespace {

FisheyeIntrinsics equidistant() { return FisheyeIntrinsics({1.0, 0.0, 0.0, 0.0}, 100.0, 80.0, 200, 160); }
FisheyeIntrinsics quartic() { return FisheyeIntrinsics({300.0, 10.0, -5.0, 0.5}, 639.5, 399.5, 1280, 800); }

// Plain bisection on the polynomial, independent of the library's solver.
double bisect_theta(double r, const std::array<double, 4>& a, double hi) {
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = a[0] * mid + a[1] * mid * mid + a[2] * mid * mid * mid + a[3] * mid * mid * mid * mid;
    (f < r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void expect_code(ErrorCode code, const auto& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Intrinsics, RejectsInvalidParameters) {
  expect_code(ErrorCode::kInvalidArgument, [] { FisheyeIntrinsics({0.0, 1.0, 0.0, 0.0}, 1, 1, 10, 10); });
  expect_code(ErrorCode::kInvalidArgument, [] { FisheyeIntrinsics({1.0, 0.0, 0.0, 0.0}, 1, 1, 0, 10); });
  expect_code(ErrorCode::kInvalidArgument, [] { FisheyeIntrinsics({1.0, 0.0, 0.0, 0.0}, 10, 1, 10, 10); });
  // f'(t) = 1 - 3t^2 turns negative before 1.8 rad.
  expect_code(ErrorCode::kInvalidArgument, [] { FisheyeIntrinsics({1.0, 0.0, -1.0, 0.0}, 1, 1, 10, 10); });
}

TEST(ForwardPolynomial, Examples) {
  EXPECT_EQ(forward_polynomial(0.0, quartic()), 0.0);
  EXPECT_DOUBLE_EQ(forward_polynomial(0.7, equidistant()), 0.7);
  // 300 + 10 - 5 + 0.5
  EXPECT_NEAR(forward_polynomial(1.0, quartic()), 305.5, 1e-12);
}

TEST(ForwardPolynomial, DomainErrors) {
  expect_code(ErrorCode::kDomain, [] { (void)forward_polynomial(-1e-9, quartic()); });
  expect_code(ErrorCode::kDomain, [] { (void)forward_polynomial(1.8 + 1e-9, quartic()); });
}

TEST(ForwardPolynomial, StrictlyIncreasing) {
  const FisheyeIntrinsics intr = synthetic::default_intrinsics();
  double prev = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double r = forward_polynomial(intr.theta_max() * i / 10000.0, intr);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(InvertPolynomial, Examples) {
  EXPECT_EQ(invert_polynomial(0.0, quartic()), 0.0);
  EXPECT_NEAR(invert_polynomial(0.9, equidistant()), 0.9, 1e-12);
  const double theta = invert_polynomial(305.5, quartic());
  EXPECT_NEAR(theta, 1.0, 1e-9);
  EXPECT_LT(std::abs(forward_polynomial(theta, quartic()) - 305.5), 1e-9);
}

TEST(InvertPolynomial, MatchesBisectionOracle) {
  const FisheyeIntrinsics intr = synthetic::default_intrinsics();
  for (int i = 0; i <= 200; ++i) {
    const double r = intr.max_radius() * i / 200.0;
    EXPECT_NEAR(invert_polynomial(r, intr), bisect_theta(r, intr.coeffs(), intr.theta_max()), 1e-10);
  }
}

TEST(InvertPolynomial, RoundTripDenseGrid) {
  for (const FisheyeIntrinsics& intr : {quartic(), synthetic::default_intrinsics(), equidistant()}) {
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double theta = intr.theta_max() * i / 9999.0;
      worst = std::max(worst, std::abs(invert_polynomial(forward_polynomial(theta, intr), intr) - theta));
    }
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(InvertPolynomial, OutOfRange) {
  const FisheyeIntrinsics intr = quartic();
  expect_code(ErrorCode::kOutOfRange, [&] { (void)invert_polynomial(intr.max_radius() + 1e-6, intr); });
  expect_code(ErrorCode::kOutOfRange, [&] { (void)invert_polynomial(-1.0, intr); });
}

TEST(PixelToRay, Examples) {
  const FisheyeIntrinsics e = equidistant();
  const UnitRay axis = pixel_to_ray({e.u0(), e.v0()}, e);
  EXPECT_EQ(axis.xs, 0.0);
  EXPECT_EQ(axis.ys, 0.0);
  EXPECT_EQ(axis.zs, 1.0);
  const UnitRay side = pixel_to_ray({e.u0() + std::numbers::pi / 2, e.v0()}, e);
  EXPECT_NEAR(side.xs, 1.0, 1e-9);
  EXPECT_NEAR(side.ys, 0.0, 1e-9);
  EXPECT_NEAR(side.zs, 0.0, 1e-9);
}

TEST(PixelToRay, AllQuadrantsAgainstOracle) {
  const FisheyeIntrinsics intr = quartic();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> rad(0.0, intr.max_radius());
  for (int i = 0; i < 500; ++i) {
    const double alpha = ang(rng);
    const double r = rad(rng);
    const PixelPoint p{intr.u0() + r * std::cos(alpha), intr.v0() + r * std::sin(alpha)};
    const double theta = bisect_theta(r, intr.coeffs(), intr.theta_max());
    const UnitRay ray = pixel_to_ray(p, intr);
    EXPECT_NEAR(ray.xs, std::sin(theta) * std::cos(alpha), 1e-9);
    EXPECT_NEAR(ray.ys, std::sin(theta) * std::sin(alpha), 1e-9);
    EXPECT_NEAR(ray.zs, std::cos(theta), 1e-9);
    EXPECT_NEAR(ray.vec().norm(), 1.0, 1e-12);
  }
}

TEST(PixelToRay, BeyondMaxRadiusThrows) {
  const FisheyeIntrinsics intr = quartic();
  expect_code(ErrorCode::kOutOfRange, [&] { (void)pixel_to_ray({intr.u0() + intr.max_radius() + 1.0, intr.v0()}, intr); });
}

TEST(RayToPixel, Examples) {
  const FisheyeIntrinsics intr = quartic();
  const PixelPoint c = ray_to_pixel({0, 0, 5}, intr);
  EXPECT_EQ(c.u, intr.u0());
  EXPECT_EQ(c.v, intr.v0());
  const PixelPoint near = ray_to_pixel({0, 0, 0.1}, intr);
  EXPECT_EQ(near.u, c.u);
  EXPECT_EQ(near.v, c.v);
  expect_code(ErrorCode::kDomain, [&] { (void)ray_to_pixel({0, 0, 0}, intr); });
  expect_code(ErrorCode::kOutOfFov, [&] { (void)ray_to_pixel({0.1, 0, -1}, intr); });
}

TEST(RayToPixel, DepthIndependent) {
  const FisheyeIntrinsics intr = quartic();
  const Eigen::Vector3d p(0.3, -0.7, 0.4);
  const PixelPoint ref = ray_to_pixel(p, intr);
  for (double s : {0.1, 1.0, 10.0}) {
    const PixelPoint q = ray_to_pixel(s * p, intr);
    EXPECT_NEAR(q.u, ref.u, 1e-9);
    EXPECT_NEAR(q.v, ref.v, 1e-9);
  }
}

TEST(RayToPixel, RoundTripGrid) {
  const FisheyeIntrinsics intr = synthetic::default_intrinsics();
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const PixelPoint p{(intr.width() - 1) * i / 49.0, (intr.height() - 1) * j / 49.0};
      if (std::hypot(p.u - intr.u0(), p.v - intr.v0()) > intr.max_radius()) continue;
      for (double lambda : {0.5, 3.0}) {
        const PixelPoint q = ray_to_pixel(lambda * pixel_to_ray(p, intr).vec(), intr);
        worst = std::max(worst, std::hypot(q.u - p.u, q.v - p.v));
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 2000);
  EXPECT_LT(worst, 1e-6);
}
