#include <gtest/gtest.h>

#include <random>

#include "mbtof/channel.hpp"

namespace mbtof {
namespace {

Scene two_antenna_scene() {
  Scene s;
  s.tx = {3.0, 4.0};
  s.rx_antennas = {{0.0, 0.0}, {6.0, 0.0}};
  s.reflectors = {{{3.0, -2.0}, {0.5, 0.5}}};
  return s;
}

TEST(Scene, PathsFromGeometry) {
  const auto paths = paths_from_scene(two_antenna_scene(), 0);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_NEAR(paths[0].delay, 5.0 / kSpeedOfLight, 1e-18);
  EXPECT_NEAR(std::abs(paths[0].amplitude - Complex(0.2, 0.0)), 0.0, 1e-15);
  const double bounce = 6.0 + std::hypot(3.0, 2.0);
  EXPECT_NEAR(paths[1].delay, bounce / kSpeedOfLight, 1e-18);
  EXPECT_NEAR(std::abs(paths[1].amplitude - Complex(0.5, 0.5) / bounce), 0.0, 1e-15);
}

TEST(Scene, PathsAreSortedByDelay) {
  Scene s;
  s.tx = {10.0, 0.0};
  s.rx_antennas = {{0.0, 0.0}};
  s.reflectors = {{{5.0, 1.0}, {0.3, 0.0}}, {{5.0, 8.0}, {0.3, 0.0}}, {{5.0, 0.1}, {0.3, 0.0}}};
  const auto paths = paths_from_scene(s, 0);
  for (std::size_t i = 1; i < paths.size(); ++i) EXPECT_LE(paths[i - 1].delay, paths[i].delay);
}

TEST(Scene, ValidationErrors) {
  Scene s;
  s.tx = {1.0, 1.0};
  EXPECT_THROW(validate(s), Error);
  s.rx_antennas = {{0.0, 0.0}, {0.0, 0.0}};
  EXPECT_THROW(validate(s), Error);
  s.rx_antennas = {{1.0, 1.0}};
  EXPECT_THROW(paths_from_scene(s, 0), Error);
  EXPECT_THROW(paths_from_scene(two_antenna_scene(), 2), Error);
}

TEST(Channel, TrueChannelOfOnePath) {
  const std::vector<PathComponent> paths{{10e-9, {2.0, 0.0}}};
  const Complex h = true_channel(paths, 2.4e9);
  EXPECT_NEAR(std::abs(h), 2.0, 1e-12);
  EXPECT_NEAR(angular_distance(std::arg(h), -kTwoPi * 24.0), 0.0, 1e-9);
}

TEST(Channel, SweepIsDeterministicPerSeed) {
  const auto plan = default_band_plan();
  ImpairmentConfig cfg;
  cfg.snr_db = 20.0;
  const auto a = synthesize_sweep(two_antenna_scene(), plan, cfg, 7);
  const auto b = synthesize_sweep(two_antenna_scene(), plan, cfg, 7);
  const auto c = synthesize_sweep(two_antenna_scene(), plan, cfg, 8);
  ASSERT_EQ(a.size(), 2u * 35u * 3u * 2u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
  EXPECT_NE(a[0].values, c[0].values);
}

TEST(Channel, SweepLayout) {
  const auto plan = default_band_plan();
  ImpairmentConfig cfg;
  cfg.fwd_rev_gap = 50e-6;
  const auto sweep = synthesize_sweep(two_antenna_scene(), plan, cfg, 1);
  const auto& fwd = sweep[0];
  const auto& rev = sweep[1];
  EXPECT_EQ(fwd.direction, Direction::Forward);
  EXPECT_EQ(rev.direction, Direction::Reverse);
  EXPECT_EQ(fwd.band_index, 0);
  EXPECT_EQ(fwd.antenna, 0);
  EXPECT_NEAR(rev.timestamp - fwd.timestamp, 50e-6, 1e-15);
  EXPECT_EQ(fwd.subcarriers.size(), 30u);
  EXPECT_EQ(sweep.back().antenna, 1);
  EXPECT_EQ(sweep.back().band_index, 34);
}

TEST(Channel, SymmetricGapsTakeBothSigns) {
  const auto plan = default_band_plan();
  ImpairmentConfig cfg = ImpairmentConfig::none();
  cfg.fwd_rev_gap = 50e-6;
  cfg.symmetric_gaps = true;
  cfg.packets_per_band = 4;
  int before = 0;
  int after = 0;
  const auto sweep = synthesize_sweep(two_antenna_scene(), plan, cfg, 3);
  for (std::size_t i = 0; i + 1 < sweep.size(); i += 2) {
    ASSERT_EQ(sweep[i].direction, Direction::Forward);
    const double gap = sweep[i + 1].timestamp - sweep[i].timestamp;
    EXPECT_NEAR(std::abs(gap), 50e-6, 1e-15);
    (gap < 0.0 ? before : after)++;
  }
  EXPECT_GT(before, 100);
  EXPECT_GT(after, 100);
}

TEST(Channel, NoiseMatchesRequestedSnr) {
  BandPlan plan;
  plan.bands.push_back({0, 5.18e9, 312.5e3, symmetric_subcarriers()});
  Scene s;
  s.tx = {2.0, 0.0};
  s.rx_antennas = {{0.0, 0.0}};
  auto clean = ImpairmentConfig::none();
  auto noisy = clean;
  noisy.snr_db = 10.0;
  double signal = 0.0, noise = 0.0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto a = synthesize_sweep(s, plan, clean, seed);
    const auto b = synthesize_sweep(s, plan, noisy, seed);
    for (std::size_t m = 0; m < a.size(); ++m) {
      for (std::size_t i = 0; i < a[m].values.size(); ++i) {
        signal += std::norm(a[m].values[i]);
        noise += std::norm(b[m].values[i] - a[m].values[i]);
      }
    }
  }
  EXPECT_NEAR(10.0 * std::log10(signal / noise), 10.0, 0.1);
}

TEST(Channel, DetectionDelayDistribution) {
  std::mt19937_64 rng(3);
  ImpairmentConfig cfg;
  std::vector<double> d;
  for (int i = 0; i < 20000; ++i) d.push_back(draw_detection_delay(rng, cfg));
  std::nth_element(d.begin(), d.begin() + 10000, d.end());
  EXPECT_NEAR(to_ns(d[10000]), 177.0, 1.0);
  EXPECT_TRUE(std::all_of(d.begin(), d.end(), [](double v) { return v >= 0.0; }));
}

TEST(Channel, RandomSceneRespectsDistanceBounds) {
  std::mt19937_64 rng(11);
  RandomSceneParams p;
  const std::vector<Point2> array{{0.0, 0.0}, {0.3, 0.0}, {0.15, 0.26}};
  for (int i = 0; i < 200; ++i) {
    const auto s = random_scene(rng, array, p);
    ASSERT_EQ(s.rx_antennas.size(), 3u);
    EXPECT_EQ(s.reflectors.size(), 4u);
    Point2 c;
    for (const auto& a : s.rx_antennas) c = c + a;
    c = (1.0 / 3.0) * c;
    const double d = distance(s.tx, c);
    EXPECT_GE(d, p.min_distance - 1e-12);
    EXPECT_LE(d, p.max_distance + 1e-12);
    EXPECT_NEAR(distance(s.rx_antennas[0], s.rx_antennas[1]), 0.3, 1e-12);
  }
}

}  // namespace
}  // namespace mbtof
