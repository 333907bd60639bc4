#include <gtest/gtest.h>

#include <random>

#include "mbtof/csi_pipeline.hpp"

namespace mbtof {
namespace {

Band band_at(double fc) { return {0, fc, 312.5e3, symmetric_subcarriers()}; }

TEST(ZeroSubcarrier, ExactForSinglePath) {
  const Band b = band_at(5.5e9);
  const std::vector<PathComponent> paths{{12.3e-9, {0.4, 0.1}}};
  for (double delta : {0.0, 177e-9, 250e-9}) {
    const auto m = synthesize_packet(paths, b, delta, {1.0, 0.0});
    const Complex got = interpolate_zero_subcarrier(m);
    EXPECT_NEAR(std::abs(got - true_channel(paths, b.center_hz)), 0.0, 1e-9) << delta;
  }
}

TEST(ZeroSubcarrier, DetectionDelayDropsOutForMultipath) {
  const Band b = band_at(2.437e9);
  const std::vector<PathComponent> paths{{8e-9, {1.0, 0.0}}, {15e-9, {0.5, 0.2}}, {31e-9, {-0.2, 0.1}}};
  const Complex ref = interpolate_zero_subcarrier(synthesize_packet(paths, b, 0.0, {1.0, 0.0}));
  for (double delta : {100e-9, 177e-9, 220e-9}) {
    const Complex got = interpolate_zero_subcarrier(synthesize_packet(paths, b, delta, {1.0, 0.0}));
    EXPECT_NEAR(std::abs(got - ref), 0.0, 1e-9 * std::abs(ref));
  }
  EXPECT_NEAR(std::abs(ref - true_channel(paths, b.center_hz)), 0.0, 0.02 * std::abs(ref));
}

TEST(ZeroSubcarrier, NeedsFourPerSide) {
  CsiMeasurement m;
  m.subcarriers = {-3, -2, -1, 1, 2, 3, 4, 5};
  m.values.assign(m.subcarriers.size(), {1.0, 0.0});
  try {
    interpolate_zero_subcarrier(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  m.subcarriers = {-4, -3, -2, -1, 1, 2, 3, 4};
  EXPECT_NEAR(std::abs(interpolate_zero_subcarrier(m) - Complex(1.0, 0.0)), 0.0, 1e-12);
  m.values.pop_back();
  EXPECT_THROW(interpolate_zero_subcarrier(m), Error);
}

TEST(Reciprocity, ProductCancelsOffsetPhase) {
  const Complex h{0.3, -0.4};
  const Complex kappa = std::polar(0.9, 0.7);
  for (double cfo_phase : {0.0, 1.0, -2.5, 3.1}) {
    const Complex fwd = h * std::polar(1.0, cfo_phase);
    const Complex rev = kappa * h * std::polar(1.0, -cfo_phase);
    const auto bc = reciprocal_combine(3, fwd, rev, kappa);
    EXPECT_EQ(bc.exponent, 2);
    EXPECT_EQ(bc.band_index, 3);
    EXPECT_NEAR(std::abs(bc.value - h * h), 0.0, 1e-15);
  }
  EXPECT_THROW(reciprocal_combine(0, h, h, {0.0, 0.0}), Error);
}

TEST(Reciprocity, QuarticRemovesQuarterTurnAmbiguity) {
  const Complex h2{0.2, 0.5};
  const auto ref = quartic_combine({0, h2, 2});
  for (int q = 0; q < 4; ++q) {
    const Complex quirk = std::polar(1.0, q * kPi / 2.0);
    const auto got = quartic_combine({0, h2 * quirk * quirk, 2});
    EXPECT_EQ(got.exponent, 4);
    EXPECT_NEAR(std::abs(got.value - ref.value), 0.0, 1e-15);
  }
  EXPECT_THROW(quartic_combine({0, h2, 1}), Error);
}

TEST(Average, MeanAndConsistency) {
  const std::vector<BandChannel> ok{{1, {1.0, 0.0}, 2}, {1, {0.0, 1.0}, 2}};
  const auto avg = average_sweeps(ok);
  EXPECT_NEAR(std::abs(avg.value - Complex(0.5, 0.5)), 0.0, 1e-15);
  const std::vector<BandChannel> mixed{{1, {1.0, 0.0}, 2}, {1, {1.0, 0.0}, 4}};
  EXPECT_THROW(average_sweeps(mixed), Error);
  EXPECT_THROW(average_sweeps(std::vector<BandChannel>{}), Error);
}

TEST(ProcessSweep, RecoversSquaredChannelPerBand) {
  const auto plan = default_band_plan();
  Scene s;
  s.tx = {2.0, 1.0};
  s.rx_antennas = {{0.0, 0.0}};
  ImpairmentConfig cfg;
  cfg.cfo_hz = 20e3;
  const auto sweep = synthesize_sweep(s, plan, cfg, 5);
  const auto paths = paths_from_scene(s, 0);
  const auto bands = process_sweep(sweep, 0, {});
  ASSERT_EQ(bands.size(), plan.size());
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const Complex h = true_channel(paths, plan.bands[i].center_hz);
    EXPECT_EQ(bands[i].band_index, static_cast<int>(i));
    EXPECT_NEAR(std::abs(bands[i].value - h * h), 0.0, 1e-9 * std::norm(h));
  }
}

TEST(ProcessSweep, QuirkSurvivesReciprocalButNotQuartic) {
  const auto plan = default_band_plan();
  Scene s;
  s.tx = {2.0, 1.0};
  s.rx_antennas = {{0.0, 0.0}};
  auto cfg = ImpairmentConfig::none();
  cfg.phase_quirk_24ghz = true;
  const auto sweep = synthesize_sweep(s, plan, cfg, 9);
  const auto paths = paths_from_scene(s, 0);
  PipelineConfig quartic;
  quartic.mode = CombineMode::Quartic;
  const auto q = process_sweep(sweep, 0, quartic);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Complex h = true_channel(paths, plan.bands[i].center_hz);
    EXPECT_NEAR(std::abs(q[i].value - std::pow(h, 4)), 0.0, 1e-9 * std::pow(std::abs(h), 4));
  }
  const auto r = process_sweep(sweep, 0, {});
  int rotated = 0;
  for (std::size_t i = 0; i < 11; ++i) {
    const Complex h = true_channel(paths, plan.bands[i].center_hz);
    if (std::abs(r[i].value - h * h) > 1e-6 * std::norm(h)) ++rotated;
  }
  EXPECT_GT(rotated, 0);
}

TEST(ProcessSweep, ForwardModeAndMissingAntenna) {
  const auto plan = default_band_plan();
  Scene s;
  s.tx = {2.0, 1.0};
  s.rx_antennas = {{0.0, 0.0}};
  const auto sweep = synthesize_sweep(s, plan, ImpairmentConfig::none(), 1);
  PipelineConfig fwd;
  fwd.mode = CombineMode::Forward;
  const auto bands = process_sweep(sweep, 0, fwd);
  const auto paths = paths_from_scene(s, 0);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    EXPECT_EQ(bands[i].exponent, 1);
    EXPECT_NEAR(std::abs(bands[i].value - true_channel(paths, plan.bands[i].center_hz)), 0.0, 1e-9);
  }
  EXPECT_THROW(process_sweep(sweep, 3, fwd), Error);
}

}  // namespace
}  // namespace mbtof
