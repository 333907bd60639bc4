#pragma once

// Raw per-subcarrier CSI -> one complex value per band at the unmeasured
// zero subcarrier. Detection delay drops out at k = 0; carrier frequency
// offset drops out of the forward/reverse product.

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "mbtof/channel.hpp"
#include "mbtof/core.hpp"
#include "mbtof/spline.hpp"

namespace mbtof {

struct BandChannel {
  int band_index = 0;
  Complex value{0.0, 0.0};
  int exponent = 1;  // factors of the physical channel contained in value
};

inline constexpr int kMinSubcarriersPerSide = 4;

// Cubic-spline extrapolation of unwrapped phase and magnitude to k = 0.
inline Complex interpolate_zero_subcarrier(const CsiMeasurement& m) {
  if (m.subcarriers.size() != m.values.size()) {
    throw Error(ErrorCode::InconsistentInput, "subcarrier/value count mismatch");
  }
  std::vector<std::size_t> order(m.subcarriers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.subcarriers[a] < m.subcarriers[b]; });

  std::vector<double> ks;
  std::vector<Complex> vs;
  for (auto i : order) {
    if (m.subcarriers[i] == 0) continue;
    ks.push_back(static_cast<double>(m.subcarriers[i]));
    vs.push_back(m.values[i]);
  }
  const auto first_positive = static_cast<std::size_t>(
      std::upper_bound(ks.begin(), ks.end(), 0.0) - ks.begin());
  const std::size_t negatives = first_positive;
  const std::size_t positives = ks.size() - first_positive;
  if (negatives < kMinSubcarriersPerSide || positives < kMinSubcarriersPerSide) {
    throw Error(ErrorCode::InsufficientData,
                "need at least 4 subcarriers on each side of the zero subcarrier");
  }

  // Unwrap outward from the two innermost subcarriers.
  std::vector<double> phase(ks.size());
  std::vector<double> magnitude(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) magnitude[i] = std::abs(vs[i]);
  phase[first_positive] = std::arg(vs[first_positive]);
  phase[first_positive - 1] =
      phase[first_positive] +
      wrap_phase(std::arg(vs[first_positive - 1]) - std::arg(vs[first_positive]));
  for (std::size_t i = first_positive + 1; i < ks.size(); ++i) {
    phase[i] = phase[i - 1] + wrap_phase(std::arg(vs[i]) - std::arg(vs[i - 1]));
  }
  for (std::size_t i = first_positive - 1; i-- > 0;) {
    phase[i] = phase[i + 1] + wrap_phase(std::arg(vs[i]) - std::arg(vs[i + 1]));
  }

  const CubicSpline phase_fit(ks, phase);
  const CubicSpline magnitude_fit(ks, magnitude);
  return std::polar(std::max(0.0, magnitude_fit(0.0)), phase_fit(0.0));
}

// fwd * rev / kappa: the squared channel with the offset phase cancelled.
inline BandChannel reciprocal_combine(int band_index, Complex fwd, Complex rev, Complex kappa) {
  if (std::abs(kappa) == 0.0) throw Error(ErrorCode::Calibration, "kappa must be nonzero");
  return {band_index, fwd * rev / kappa, 2};
}

// Squares a reciprocity product; removes a phase ambiguity of k*pi/2 that is
// common to both directions.
inline BandChannel quartic_combine(const BandChannel& squared) {
  if (squared.exponent != 2) {
    throw Error(ErrorCode::InconsistentInput, "quartic combine expects a reciprocity product");
  }
  return {squared.band_index, squared.value * squared.value, 4};
}

inline BandChannel average_sweeps(std::span<const BandChannel> packets) {
  if (packets.empty()) throw Error(ErrorCode::InsufficientData, "nothing to average");
  BandChannel out{packets.front().band_index, {0.0, 0.0}, packets.front().exponent};
  for (const auto& p : packets) {
    if (p.exponent != out.exponent || p.band_index != out.band_index) {
      throw Error(ErrorCode::InconsistentInput, "mixed band or exponent in average");
    }
    out.value += p.value;
  }
  out.value /= static_cast<double>(packets.size());
  return out;
}

enum class CombineMode {
  Forward,     // forward CSI only, exponent 1
  Reciprocal,  // forward * reverse / kappa, exponent 2
  Quartic,     // (forward * reverse / kappa)^2, exponent 4
};

inline int exponent_of(CombineMode mode) {
  switch (mode) {
    case CombineMode::Forward: return 1;
    case CombineMode::Reciprocal: return 2;
    case CombineMode::Quartic: return 4;
  }
  return 1;
}

struct PipelineConfig {
  CombineMode mode = CombineMode::Reciprocal;
  Complex kappa{1.0, 0.0};
};

// One averaged BandChannel per band (ascending band index) for one antenna.
inline std::vector<BandChannel> process_sweep(std::span<const CsiMeasurement> sweep, int antenna,
                                              const PipelineConfig& cfg) {
  struct Pair {
    const CsiMeasurement* fwd = nullptr;
    const CsiMeasurement* rev = nullptr;
  };
  std::map<int, std::map<int, Pair>> by_band;
  for (const auto& m : sweep) {
    if (m.antenna != antenna) continue;
    auto& slot = by_band[m.band_index][m.packet];
    (m.direction == Direction::Forward ? slot.fwd : slot.rev) = &m;
  }

  std::vector<BandChannel> out;
  for (const auto& [band, packets] : by_band) {
    std::vector<BandChannel> combined;
    for (const auto& [pkt, pair] : packets) {
      if (cfg.mode == CombineMode::Forward) {
        if (pair.fwd) combined.push_back({band, interpolate_zero_subcarrier(*pair.fwd), 1});
        continue;
      }
      if (!pair.fwd || !pair.rev) continue;
      auto product = reciprocal_combine(band, interpolate_zero_subcarrier(*pair.fwd),
                                        interpolate_zero_subcarrier(*pair.rev), cfg.kappa);
      combined.push_back(cfg.mode == CombineMode::Quartic ? quartic_combine(product) : product);
    }
    if (!combined.empty()) out.push_back(average_sweeps(combined));
  }
  if (out.empty()) throw Error(ErrorCode::InsufficientData, "no usable packets for antenna");
  return out;
}

}  // namespace mbtof
