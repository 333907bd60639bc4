#include <gtest/gtest.h>

#include <sstream>

#include "mbtof/experiment.hpp"

namespace mbtof {
namespace {

Scenario from(const std::string& text) { return parse_scenario(detail::parse_json_text(text, "test")); }

const char* kSmallGrid = R"("solver": {"grid": {"tau_max_ns": 60, "step_ns": 0.05}})";

TEST(Stats, Quantiles) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.95), 4.8);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 5.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Stats, TrialSeedsDiffer) {
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
  EXPECT_EQ(trial_seed(7, 3), trial_seed(7, 3));
}

TEST(ParallelFor, VisitsEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](int i) { ++hits[static_cast<std::size_t>(i)]; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, 3, [](int i) {
                 if (i == 5) throw Error(ErrorCode::InvalidArgument, "boom");
               }),
               Error);
}

TEST(Experiment, NoiselessTofMeetsOracleBound) {
  const auto s = from(std::string(R"({
    "scene": {"tx_m": [2.5, 0.4], "rx_antennas_m": [[0, 0]]},
    "bounds": {"median_error_ns_max": 0.05}, )") + kSmallGrid + "}");
  ExperimentSpec spec;
  spec.trials = 2;
  const auto out = run(s, spec);
  EXPECT_TRUE(out.bounds_ok);
  EXPECT_LE(out.summary["abs_error_ns"]["median"].get<double>(), 0.05);
  EXPECT_EQ(out.summary["experiment"], "tof");
  EXPECT_TRUE(out.files.count("tof.csv"));
}

TEST(Experiment, ViolatedBoundFlipsStatus) {
  const auto s = from(std::string(R"({
    "scene": {"tx_m": [2.5, 0.4], "rx_antennas_m": [[0, 0]]},
    "impairments": {"snr_db": 0},
    "bounds": {"median_error_ns_max": 0.0}, )") + kSmallGrid + "}");
  ExperimentSpec spec;
  spec.trials = 1;
  EXPECT_FALSE(run(s, spec).bounds_ok);
}

TEST(Experiment, UnknownBoundRejected) {
  const auto s = from(R"({"bounds": {"nonsense": 1}})");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Sweep;
  EXPECT_THROW(run(s, spec), Error);
  spec.trials = 0;
  EXPECT_THROW(run(from("{}"), spec), Error);
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  const auto s = from(std::string(R"({
    "random_scene": {"room_m": 8, "max_distance_m": 6, "rx_array_m": [[0, 0], [1, 0], [0.5, 0.866]]},
    "impairments": {"snr_db": 20}, )") + kSmallGrid + "}");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Localize;
  spec.trials = 4;
  spec.seed = 11;
  spec.workers = 1;
  const auto a = run(s, spec);
  spec.workers = 3;
  const auto b = run(s, spec);
  EXPECT_EQ(a.files.at("localization.csv"), b.files.at("localization.csv"));
  EXPECT_EQ(a.files.at("localization_cdf.csv"), b.files.at("localization_cdf.csv"));

  std::istringstream cdf(a.files.at("localization_cdf.csv"));
  std::string line;
  std::getline(cdf, line);
  double prev = -1.0;
  while (std::getline(cdf, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Experiment, ProfileFindsExpectedPeaks) {
  const auto s = from(R"({
    "scene": {"tx_m": [1.56, 0], "rx_antennas_m": [[0, 0]],
              "reflectors": [{"position_m": [0.78, 1.28125], "coefficient": 1},
                             {"position_m": [0.78, -2.26971], "coefficient": 1}]},
    "impairments": {"cfo_ppm": 0, "detection_delay_median_ns": 0, "detection_delay_stddev_ns": 0},
    "pipeline": {"mode": "forward"},
    "solver": {"grid": {"tau_max_ns": 60, "step_ns": 0.05}},
    "bounds": {"expected_peaks_ns": [5.2, 10.0, 16.0], "peak_tolerance_ns": 0.5}
  })");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Profile;
  const auto out = run(s, spec);
  EXPECT_TRUE(out.bounds_ok) << out.summary.dump();
  EXPECT_TRUE(out.files.count("profile.csv"));
  EXPECT_TRUE(out.files.count("peaks.csv"));
}

TEST(Experiment, SweepSummary) {
  const auto s = from(R"({"protocol": {"loss_probability": 0.05}, "bounds": {"median_duration_ms_max": 120}})");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Sweep;
  spec.trials = 50;
  const auto out = run(s, spec);
  EXPECT_TRUE(out.bounds_ok);
  EXPECT_EQ(out.summary["unsynchronized_trials"], 0);
  EXPECT_TRUE(out.files.count("trace.csv"));
}

TEST(Experiment, FollowSummary) {
  const auto s = from(R"({"follow": {"duration_s": 5, "trajectory": {"kind": "stationary", "start_m": [1.4, 0]}},
                          "bounds": {"median_rmse_m_max": 0.2}})");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Follow;
  spec.trials = 3;
  const auto out = run(s, spec);
  EXPECT_TRUE(out.bounds_ok);
  EXPECT_TRUE(out.files.count("follow_trace.csv"));
  EXPECT_TRUE(out.files.count("user_trajectory.csv"));
}

TEST(Experiment, CalibrateWritesRecord) {
  const auto s = from(R"({
    "scene": {"tx_m": [2.0, 0], "rx_antennas_m": [[0, 0]]},
    "impairments": {"hardware_delay_ns": 30},
    "bounds": {"offset_error_ns_max": 0.05},
    "solver": {"grid": {"tau_max_ns": 100, "step_ns": 0.05}}})");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Calibrate;
  const auto out = run(s, spec);
  EXPECT_TRUE(out.bounds_ok) << out.summary.dump();
  const auto rec = parse_calibration(Json::parse(out.files.at("calibration.json")), "calibration");
  EXPECT_NEAR(to_ns(rec.offset), 30.0, 0.05);
}

}  // namespace
}  // namespace mbtof
