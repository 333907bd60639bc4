#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mbtof/scenario.hpp"

namespace mbtof {
namespace {

Scenario parse(const std::string& text) { return parse_scenario(detail::parse_json_text(text, "test")); }

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    return e.what();
  }
  return "no error";
}

TEST(Scenario, EmptyObjectUsesDefaults) {
  const auto s = parse("{}");
  EXPECT_EQ(s.plan.size(), 35u);
  EXPECT_FALSE(s.scene.has_value());
  EXPECT_EQ(s.estimator.method, Method::Ndft);
  EXPECT_DOUBLE_EQ(s.protocol.dwell, 2.4e-3);
}

TEST(Scenario, UnitsAreScaled) {
  const auto s = parse(R"({
    "scene": {"tx_m": [1.5, 0], "rx_antennas_m": [[0, 0]],
              "reflectors": [{"position_m": [0.5, 1], "coefficient": {"re": 0.3, "im": -0.1}}]},
    "impairments": {"detection_delay_median_ns": 100, "fwd_rev_gap_us": 50, "symmetric_gaps": true, "snr_db": 20,
                    "hardware_delay_ns": 30, "band_dwell_ms": 3, "kappa": 0.5},
    "solver": {"grid": {"tau_max_ns": 100, "step_ns": 0.1}, "method": "crt", "crt_tolerance_rad": 0.2,
               "crt_step_ns": 0.004},
    "protocol": {"dwell_ms": 3, "airtime_us": 120, "loss_probability": 0.05},
    "follow": {"target_distance_m": 2, "trajectory": {"kind": "random", "speed_mps": 0.5}},
    "pipeline": {"mode": "quartic"},
    "known_distance_m": 2.5
  })");
  ASSERT_TRUE(s.scene.has_value());
  EXPECT_DOUBLE_EQ(s.scene->tx.x, 1.5);
  EXPECT_EQ(s.scene->reflectors.front().coefficient, Complex(0.3, -0.1));
  EXPECT_NEAR(s.impairments.detection_delay_median, 100e-9, 1e-21);
  EXPECT_NEAR(s.impairments.fwd_rev_gap, 50e-6, 1e-18);
  EXPECT_TRUE(s.impairments.symmetric_gaps);
  EXPECT_NEAR(s.estimator.crt_step, 4e-12, 1e-24);
  EXPECT_EQ(*s.impairments.snr_db, 20.0);
  EXPECT_NEAR(s.impairments.hardware_delay, 30e-9, 1e-21);
  EXPECT_EQ(s.impairments.kappa, Complex(0.5, 0.0));
  EXPECT_NEAR(s.estimator.grid.tau_max, 100e-9, 1e-21);
  EXPECT_EQ(s.estimator.method, Method::Crt);
  EXPECT_NEAR(s.protocol.airtime, 120e-6, 1e-18);
  EXPECT_DOUBLE_EQ(s.follow.tracker.target_distance, 2.0);
  EXPECT_EQ(s.follow.trajectory.kind, "random");
  EXPECT_EQ(s.estimator.pipeline.mode, CombineMode::Quartic);
  EXPECT_DOUBLE_EQ(*s.known_distance, 2.5);
}

TEST(Scenario, BandPlanForms) {
  EXPECT_EQ(parse(R"({"band_plan": "24ghz"})").plan.size(), 11u);
  const auto s = parse(R"({"band_plan": [{"center_hz": 2.412e9}, {"center_hz": 5.18e9, "subcarriers": [-4,-3,-2,-1,1,2,3,4]}]})");
  ASSERT_EQ(s.plan.size(), 2u);
  EXPECT_EQ(s.plan.bands[0].subcarriers.size(), 30u);
  EXPECT_EQ(s.plan.bands[1].subcarriers.size(), 8u);
  EXPECT_EQ(s.plan.bands[1].index, 1);
  EXPECT_NE(parse_error(R"({"band_plan": "6ghz"})").find("band_plan"), std::string::npos);
}

TEST(Scenario, FieldDiagnostics) {
  EXPECT_NE(parse_error(R"({"impairments": {"snr": 20}})").find("'impairments.snr': unknown field"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"solver": {"max_iters": 1.5}})").find("'solver.max_iters': expected an integer"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"scene": {"tx_m": [1], "rx_antennas_m": [[0,0]]}})").find("'scene.tx_m'"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"scene": {"tx_m": [1, 0], "rx_antennas_m": [[0,0], [1, "a"]]}})")
                .find("scene.rx_antennas_m[1]"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"pipeline": {"mode": "cubic"}})").find("pipeline.mode"), std::string::npos);
  EXPECT_NE(parse_error(R"({"protocol": {"loss_probability": 1.5}})").find("'protocol'"), std::string::npos);
  EXPECT_NE(parse_error(R"({"follow": {"trajectory": {"kind": "fly"}}})").find("follow.trajectory.kind"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"impairments": {"packets_per_band": 0}})").find("packets_per_band"),
            std::string::npos);
  EXPECT_NE(parse_error("[1, 2]").find("expected an object"), std::string::npos);
}

TEST(Scenario, SyntaxErrorReportsLineAndColumn) {
  const std::string msg = parse_error("{\n  \"kind\": \"tof\",\n  \"trials\" 3\n}");
  EXPECT_NE(msg.find("test:3:"), std::string::npos) << msg;
}

TEST(Override, DottedKeys) {
  Json root = Json::parse(R"({"solver": {"alpha_scale": 0.1}})");
  apply_override(root, "solver.alpha_scale=0.01");
  apply_override(root, "impairments.snr_db=25");
  apply_override(root, "pipeline.mode=quartic");
  apply_override(root, "scene={\"tx_m\": [1, 0], \"rx_antennas_m\": [[0, 0]]}");
  const auto s = parse_scenario(root);
  EXPECT_DOUBLE_EQ(s.estimator.solver.alpha_scale, 0.01);
  EXPECT_EQ(*s.impairments.snr_db, 25.0);
  EXPECT_EQ(s.estimator.pipeline.mode, CombineMode::Quartic);
  EXPECT_TRUE(s.scene.has_value());
  EXPECT_THROW(apply_override(root, "novalue"), Error);
  EXPECT_THROW(apply_override(root, "solver..x=1"), Error);
  EXPECT_THROW(apply_override(root, "solver.alpha_scale.x=1"), Error);
}

TEST(Calibration, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mbtof_scenario_test";
  std::filesystem::create_directories(dir);
  CalibrationRecord rec;
  rec.offset = 30e-9;
  rec.kappa = std::polar(1.0, 1.0);
  std::ofstream(dir / "cal.json") << calibration_to_json(rec).dump();
  std::ofstream(dir / "s.json") << R"({"calibration_file": "cal.json"})";
  const auto s = load_scenario(dir / "s.json");
  ASSERT_TRUE(s.calibration.has_value());
  EXPECT_NEAR(s.calibration->offset, 30e-9, 1e-20);
  EXPECT_NEAR(std::abs(s.calibration->kappa - rec.kappa), 0.0, 1e-15);
  EXPECT_THROW(load_scenario(dir / "s.json", {"calibration_file=missing.json"}), Error);
}

}  // namespace
}  // namespace mbtof
