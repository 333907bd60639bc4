#pragma once

// Raw sweep -> per-antenna time of flight, and the one-time calibration of
// the reciprocity constant and the constant ToF offset.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "mbtof/band_plan.hpp"
#include "mbtof/channel.hpp"
#include "mbtof/csi_pipeline.hpp"
#include "mbtof/ndft.hpp"
#include "mbtof/tof_solver.hpp"

namespace mbtof {

enum class Method { Ndft, Crt };

struct EstimatorConfig {
  PipelineConfig pipeline;
  SolverConfig solver;
  DelayGrid grid;
  Method method = Method::Ndft;
  double crt_tolerance = 0.3;  // rad
  double crt_step = 2e-12;     // s, search step over the range of `grid`
};

struct AntennaEstimate {
  ToFEstimate tof;
  std::vector<BandChannel> bands;
  std::optional<MultipathProfile> profile;  // Method::Ndft only
  bool low_confidence = false;              // Method::Crt only
};

// Caches the NDFT operator and its norm for one band plan.
class TofEstimator {
 public:
  TofEstimator(const BandPlan& plan, EstimatorConfig cfg)
      : plan_(plan), cfg_(std::move(cfg)), freqs_(plan.center_frequencies()), op_(freqs_, cfg_.grid) {
    validate(plan_);
    validate(cfg_.solver);
    if (!(cfg_.crt_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "crt_step must be > 0");
    norm_ = spectral_norm(op_);
  }

  const EstimatorConfig& config() const { return cfg_; }
  const BandPlan& plan() const { return plan_; }
  double op_norm() const { return norm_; }

  // Band channels must cover every band of the plan, ascending by index.
  AntennaEstimate estimate(std::vector<BandChannel> bands) const {
    if (bands.size() != plan_.size()) {
      throw Error(ErrorCode::InsufficientData, "need one channel value per band of the plan");
    }
    AntennaEstimate out;
    const int exponent = bands.front().exponent;
    const auto values = values_of(bands);
    if (cfg_.method == Method::Crt) {
      std::vector<double> phases;
      for (const auto& v : values) phases.push_back(std::arg(v));
      DelayGrid fine = cfg_.grid;
      fine.step = cfg_.crt_step;
      const auto crt = crt_estimate(phases, freqs_, fine, cfg_.crt_tolerance, exponent);
      out.tof = crt.tof;
      out.low_confidence = crt.low_confidence;
    } else {
      auto prof = invert_ndft(values, op_, norm_, cfg_.solver, exponent);
      out.tof = first_peak(prof, cfg_.solver.peak_threshold_frac);
      out.profile = std::move(prof);
    }
    out.bands = std::move(bands);
    return out;
  }

  AntennaEstimate estimate(std::span<const CsiMeasurement> sweep, int antenna) const {
    return estimate(process_sweep(sweep, antenna, cfg_.pipeline));
  }

 private:
  BandPlan plan_;
  EstimatorConfig cfg_;
  std::vector<double> freqs_;
  NdftOperator op_;
  double norm_ = 0.0;
};

struct CalibrationRecord {
  Complex kappa{1.0, 0.0};
  double offset = 0.0;  // s, subtracted from every ToF estimate
};

struct CalibrationConfig {
  double search_halfwidth = 0.1e-9;  // s around the coarse offset
  double search_step = 1e-12;        // s
};

// From a line-of-sight sweep at a known distance: coarse offset from the
// estimator, refined by maximizing |sum_i v_i exp(+j 2 pi f_i e tau)| over
// tau and polished by ternary search; kappa is the residual complex factor relative to a free-space path
// of amplitude 1 / distance. The sweep is combined with kappa = 1.
inline CalibrationRecord calibrate(std::span<const CsiMeasurement> sweep, const BandPlan& plan,
                                   double known_distance, const EstimatorConfig& base,
                                   int antenna = 0, const CalibrationConfig& cc = {}) {
  if (!(known_distance > 0.0)) throw Error(ErrorCode::Calibration, "known distance must be > 0");
  EstimatorConfig cfg = base;
  cfg.pipeline.kappa = {1.0, 0.0};
  if (cfg.pipeline.mode != CombineMode::Reciprocal) cfg.pipeline.mode = CombineMode::Reciprocal;
  const TofEstimator estimator(plan, cfg);
  const auto est = estimator.estimate(sweep, antenna);

  const double truth = known_distance / kSpeedOfLight;
  const auto freqs = plan.center_frequencies();
  const int e = est.bands.front().exponent;
  const auto coherence = [&](double tau) {
    Complex s{0.0, 0.0};
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      s += est.bands[i].value * std::polar(1.0, kTwoPi * freqs[i] * e * tau);
    }
    return s;
  };

  double best_tau = est.tof.seconds;
  double best = -1.0;
  for (double tau = est.tof.seconds - cc.search_halfwidth; tau <= est.tof.seconds + cc.search_halfwidth;
       tau += cc.search_step) {
    const double c = std::abs(coherence(tau));
    if (c > best) {
      best = c;
      best_tau = tau;
    }
  }
  double lo = best_tau - cc.search_step;
  double hi = best_tau + cc.search_step;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (std::abs(coherence(m1)) < std::abs(coherence(m2))) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  best_tau = 0.5 * (lo + hi);

  CalibrationRecord rec;
  rec.offset = best_tau - truth;
  rec.kappa = coherence(best_tau) / static_cast<double>(freqs.size()) *
              std::pow(known_distance, static_cast<double>(e));
  if (std::abs(rec.kappa) == 0.0) throw Error(ErrorCode::Calibration, "calibration sweep carries no signal");
  return rec;
}

}  // namespace mbtof
