#include <gtest/gtest.h>

#include "mbtof/spline.hpp"

namespace mbtof {
namespace {

TEST(CubicSpline, ReproducesAffineData) {
  const std::vector<double> x{-4, -2, -1, 1, 3, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(2.5 * v - 0.75);
  const CubicSpline s(x, y);
  for (double t : {-5.0, -3.3, 0.0, 2.2, 7.0}) EXPECT_NEAR(s(t), 2.5 * t - 0.75, 1e-12);
}

// Values from scipy.interpolate.CubicSpline(bc_type="natural").
TEST(CubicSpline, MatchesNaturalSplineReference) {
  const std::vector<double> x{-3, -1, 0.5, 2, 4};
  const std::vector<double> y{1.0, -2.0, 0.5, 3.0, -1.0};
  const CubicSpline s(x, y);
  EXPECT_NEAR(s(-2.0), -1.1721428571428572, 1e-12);
  EXPECT_NEAR(s(0.0), -0.6487301587301586, 1e-12);
  EXPECT_NEAR(s(1.0), 1.6687301587301588, 1e-12);
  EXPECT_NEAR(s(3.5), 0.49508928571428534, 1e-12);
  EXPECT_NEAR(s(5.0), -3.7921428571428573, 1e-12);
}

TEST(CubicSpline, InterpolatesKnots) {
  const std::vector<double> x{0, 1, 2.5, 3};
  const std::vector<double> y{4, -1, 2, 0};
  const CubicSpline s(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(s(x[i]), y[i], 1e-12);
}

TEST(CubicSpline, RejectsBadInput) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(CubicSpline(one, one), Error);
  const std::vector<double> x{0, 0, 1};
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(CubicSpline(x, y), Error);
}

}  // namespace
}  // namespace mbtof
