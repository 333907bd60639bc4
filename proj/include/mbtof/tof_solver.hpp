#pragma once

// Sparse inverse NDFT by proximal gradient (iterative soft thresholding),
// first-peak time-of-flight extraction and a phase-consistency grid search.

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "mbtof/core.hpp"
#include "mbtof/csi_pipeline.hpp"
#include "mbtof/ndft.hpp"

namespace mbtof {

struct SolverConfig {
  // Sparsity weight. When unset: alpha_scale * ||F^H h||_inf.
  std::optional<double> alpha;
  double alpha_scale = 0.1;
  // Stop when ||p_{t+1} - p_t||_2 < epsilon. When unset: epsilon_scale * ||h||_2.
  std::optional<double> epsilon;
  double epsilon_scale = 1e-6;
  int max_iters = 20000;
  double peak_threshold_frac = 0.2;
};

inline void validate(const SolverConfig& cfg) {
  if (cfg.alpha && *cfg.alpha < 0.0) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  }
  if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(cfg.peak_threshold_frac > 0.0 && cfg.peak_threshold_frac <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "peak_threshold_frac must be in (0, 1]");
  }
}

struct MultipathProfile {
  DelayGrid grid;
  ComplexVector p;
  int exponent = 1;
  double alpha = 0.0;
  bool converged = false;
  int iterations = 0;
  // ||h - F p||^2 + alpha ||p||_1, one entry per iterate starting at p_0.
  std::vector<double> objective;

  std::size_t nonzeros() const {
    return static_cast<std::size_t>(
        std::count_if(p.begin(), p.end(), [](const Complex& v) { return v != Complex(0.0, 0.0); }));
  }

  bool objective_non_increasing(double rel_slack = 1e-12) const {
    for (std::size_t i = 1; i < objective.size(); ++i) {
      if (objective[i] > objective[i - 1] + rel_slack * std::max(1.0, objective[i - 1])) {
        return false;
      }
    }
    return true;
  }
};

struct ToFEstimate {
  double seconds = 0.0;
  double peak_magnitude = 0.0;
  int profile_peak_count = 0;
};

// Complex soft threshold: zero below t, magnitude shrunk by t otherwise.
inline void sparsify(std::span<Complex> p, double threshold) {
  const double t2 = threshold * threshold;
  for (auto& v : p) {
    const double mag2 = std::norm(v);
    if (mag2 < t2 || mag2 == 0.0) {
      v = Complex(0.0, 0.0);
    } else {
      const double mag = std::sqrt(mag2);
      v *= (mag - threshold) / mag;
    }
  }
}

inline double l1_norm(std::span<const Complex> p) {
  double s = 0.0;
  for (const auto& v : p) {
    if (v != Complex(0.0, 0.0)) s += std::sqrt(std::norm(v));
  }
  return s;
}

// Minimizes ||h - F p||^2 + alpha ||p||_1 from p_0 = 0 by proximal gradient
// with backtracking: each step p+ = sparsify(p - s * 2 F^H (F p - h), s * alpha)
// must satisfy the quadratic upper bound at p, otherwise s is halved. Each
// iteration first tries twice the last accepted step, capped at
// 1 / (2 ||F||); s never needs to drop below 1 / (2 ||F||^2), where the bound
// holds unconditionally. Objective is non-increasing.
inline MultipathProfile invert_ndft(std::span<const Complex> h, const NdftOperator& op,
                                    double op_norm, const SolverConfig& cfg, int exponent = 1) {
  validate(cfg);
  if (h.size() != op.rows() || h.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "need one channel value per frequency, at least 2");
  }
  const Eigen::Map<const Eigen::VectorXcd> hv(h.data(), static_cast<Eigen::Index>(h.size()));
  const Eigen::VectorXcd backprojection = op.adjoint(hv);

  MultipathProfile prof;
  prof.grid = op.grid();
  prof.exponent = exponent;
  prof.alpha = cfg.alpha ? *cfg.alpha : cfg.alpha_scale * backprojection.cwiseAbs().maxCoeff();
  const double epsilon = cfg.epsilon ? *cfg.epsilon : cfg.epsilon_scale * hv.norm();
  const double min_step = 1.0 / (2.0 * op_norm * op_norm);
  const double max_step = std::max(min_step, 1.0 / (2.0 * op_norm));
  double step = max_step;

  const auto l1 = [](const Eigen::VectorXcd& v) {
    return l1_norm({v.data(), static_cast<std::size_t>(v.size())});
  };

  Eigen::VectorXcd p = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(op.cols()));
  Eigen::VectorXcd residual = -hv;
  double smooth = residual.squaredNorm();
  prof.objective.push_back(smooth);

  const auto count_nonzero = [](const Eigen::VectorXcd& v) {
    return std::count_if(v.data(), v.data() + v.size(),
                         [](const Complex& c) { return c != Complex(0.0, 0.0); });
  };

  Eigen::VectorXcd next;
  Eigen::VectorXcd next_residual;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Eigen::VectorXcd gradient =
        count_nonzero(p) < static_cast<std::ptrdiff_t>(op.rows())
            ? Eigen::VectorXcd(2.0 * (op.gram_apply(p) - backprojection))
            : Eigen::VectorXcd(2.0 * op.adjoint(residual));
    step = std::min(max_step, 2.0 * step);
    double next_smooth = 0.0;
    for (;;) {
      next = p - step * gradient;
      sparsify({next.data(), static_cast<std::size_t>(next.size())}, step * prof.alpha);
      next_residual = op.apply(next) - hv;
      next_smooth = next_residual.squaredNorm();
      const Eigen::VectorXcd delta = next - p;
      const double bound = smooth + gradient.dot(delta).real() + delta.squaredNorm() / (2.0 * step);
      if (next_smooth <= bound || step <= min_step) break;
      step = std::max(min_step, 0.5 * step);
    }
    const double change = (next - p).norm();
    p.swap(next);
    residual.swap(next_residual);
    smooth = next_smooth;
    prof.objective.push_back(smooth + prof.alpha * l1(p));
    prof.iterations = it + 1;
    if (change < epsilon) {
      prof.converged = true;
      break;
    }
  }
  prof.p.assign(p.data(), p.data() + p.size());
  return prof;
}

inline MultipathProfile invert_ndft(std::span<const Complex> h, std::span<const double> frequencies,
                                    const DelayGrid& grid, const SolverConfig& cfg,
                                    int exponent = 1) {
  const NdftOperator op(frequencies, grid);
  return invert_ndft(h, op, spectral_norm(op), cfg, exponent);
}

struct Peak {
  std::size_t index = 0;
  double delay = 0.0;  // profile delay, not divided by the exponent
  double magnitude = 0.0;
};

// Local maxima of |p| at or above frac * max|p|, ascending in delay.
// A plateau reports its leftmost point.
inline std::vector<Peak> find_peaks(const MultipathProfile& prof, double frac) {
  std::vector<double> mag(prof.p.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(prof.p[i]);
  const double peak_max = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  std::vector<Peak> peaks;
  if (peak_max == 0.0) return peaks;
  const double floor = frac * peak_max;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    if (mag[i] < floor) continue;
    const bool rises = i == 0 || mag[i] > mag[i - 1];
    std::size_t j = i;
    while (j + 1 < mag.size() && mag[j + 1] == mag[i]) ++j;
    const bool falls = j + 1 == mag.size() || mag[j + 1] < mag[i];
    if (rises && falls) peaks.push_back({i, prof.grid.at(i), mag[i]});
  }
  return peaks;
}

inline ToFEstimate first_peak(const MultipathProfile& prof, double peak_threshold_frac = 0.2) {
  const auto peaks = find_peaks(prof, peak_threshold_frac);
  if (peaks.empty()) throw Error(ErrorCode::NoPeak, "profile has no nonzero entry");
  return {peaks.front().delay / prof.exponent, peaks.front().magnitude,
          static_cast<int>(peaks.size())};
}

struct CrtEstimate {
  ToFEstimate tof;
  int consistent_bands = 0;
  bool low_confidence = false;
};

// For each grid delay counts bands whose predicted phase -2 pi f tau lies
// within tolerance of the measured phase; returns the best-supported delay,
// smallest on ties.
inline CrtEstimate crt_estimate(std::span<const double> phases, std::span<const double> frequencies,
                                const DelayGrid& grid, double phase_tolerance, int exponent = 1) {
  if (phases.size() != frequencies.size() || phases.empty()) {
    throw Error(ErrorCode::InvalidArgument, "need one phase per frequency");
  }
  validate(grid);
  int best = -1;
  std::size_t best_index = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double tau = grid.at(k);
    int count = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
      if (angular_distance(-kTwoPi * frequencies[i] * tau, phases[i]) < phase_tolerance) ++count;
    }
    if (count > best) {
      best = count;
      best_index = k;
    }
  }
  CrtEstimate est;
  est.tof.seconds = grid.at(best_index) / exponent;
  est.tof.peak_magnitude = static_cast<double>(best) / static_cast<double>(phases.size());
  est.tof.profile_peak_count = 1;
  est.consistent_bands = best;
  est.low_confidence = 2 * best <= static_cast<int>(phases.size());
  return est;
}

// Convenience: band values ordered like `frequencies`.
inline std::vector<Complex> values_of(std::span<const BandChannel> bands) {
  std::vector<Complex> v;
  v.reserve(bands.size());
  for (const auto& b : bands) v.push_back(b.value);
  return v;
}

}  // namespace mbtof
