#pragma once

// Non-contiguous Wi-Fi spectrum model: bands, subcarrier grids and the
// delay span over which the multi-band phase signature is unique.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "mbtof/core.hpp"

namespace mbtof {

constexpr double kDefaultSubcarrierSpacingHz = 312.5e3;
constexpr int kDefaultSubcarrierHalfWidth = 15;

struct Band {
  int index = 0;
  double center_hz = 0.0;
  double spacing_hz = kDefaultSubcarrierSpacingHz;
  std::vector<int> subcarriers;

  bool has_subcarrier(int k) const {
    return std::find(subcarriers.begin(), subcarriers.end(), k) != subcarriers.end();
  }
};

struct BandPlan {
  std::vector<Band> bands;

  std::size_t size() const { return bands.size(); }
  bool empty() const { return bands.empty(); }

  std::vector<double> center_frequencies() const {
    std::vector<double> out;
    out.reserve(bands.size());
    for (const auto& b : bands) out.push_back(b.center_hz);
    return out;
  }

  const Band& band(int index) const {
    for (const auto& b : bands) {
      if (b.index == index) return b;
    }
    throw Error(ErrorCode::InvalidArgument, "no band with index " + std::to_string(index));
  }
};

// Symmetric measured subcarrier set: -half..-1, 1..half.
inline std::vector<int> symmetric_subcarriers(int half_width = kDefaultSubcarrierHalfWidth) {
  std::vector<int> ks;
  ks.reserve(2 * static_cast<std::size_t>(half_width));
  for (int k = -half_width; k <= half_width; ++k) {
    if (k != 0) ks.push_back(k);
  }
  return ks;
}

// Throws on a band that violates the Band invariants.
inline void validate(const Band& band, bool measured_mode = true) {
  if (!(band.center_hz > 0.0) || !(band.spacing_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "band " + std::to_string(band.index) +
                                                ": center and spacing must be positive");
  }
  std::set<int> seen(band.subcarriers.begin(), band.subcarriers.end());
  if (seen.size() != band.subcarriers.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "band " + std::to_string(band.index) + ": duplicate subcarrier index");
  }
  if (measured_mode && seen.count(0) != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "band " + std::to_string(band.index) + ": zero subcarrier is not measured");
  }
}

inline void validate(const BandPlan& plan) {
  std::set<double> centers;
  for (const auto& b : plan.bands) {
    validate(b);
    if (!centers.insert(b.center_hz).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate center frequency in band plan");
    }
  }
}

// US channelization: 2.4 GHz channels 1-11 and the 24 20 MHz channels at
// 5 GHz (UNII-1/2, UNII-2e DFS, UNII-3), 35 bands total.
inline const std::vector<int>& default_channel_numbers_24ghz() {
  static const std::vector<int> channels{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  return channels;
}

inline const std::vector<int>& default_channel_numbers_5ghz() {
  static const std::vector<int> channels{36,  40,  44,  48,  52,  56,  60,  64,
                                         100, 104, 108, 112, 116, 120, 124, 128,
                                         132, 136, 140, 149, 153, 157, 161, 165};
  return channels;
}

inline double channel_center_hz_24ghz(int channel) { return (2407.0 + 5.0 * channel) * 1e6; }
inline double channel_center_hz_5ghz(int channel) { return (5000.0 + 5.0 * channel) * 1e6; }

inline BandPlan default_band_plan() {
  BandPlan plan;
  int index = 0;
  for (int ch : default_channel_numbers_24ghz()) {
    plan.bands.push_back({index++, channel_center_hz_24ghz(ch), kDefaultSubcarrierSpacingHz,
                          symmetric_subcarriers()});
  }
  for (int ch : default_channel_numbers_5ghz()) {
    plan.bands.push_back({index++, channel_center_hz_5ghz(ch), kDefaultSubcarrierSpacingHz,
                          symmetric_subcarriers()});
  }
  return plan;
}

// Bands whose center lies below 3 GHz.
inline BandPlan sub_plan_24ghz(const BandPlan& plan) {
  BandPlan out;
  for (const auto& b : plan.bands) {
    if (b.center_hz < 3e9) out.bands.push_back(b);
  }
  return out;
}

inline bool is_24ghz(const Band& band) { return band.center_hz < 3e9; }

inline double subcarrier_frequency(const Band& band, int k) {
  if (k != 0 && !band.has_subcarrier(k)) {
    throw Error(ErrorCode::InvalidSubcarrier,
                "subcarrier " + std::to_string(k) + " not in band " + std::to_string(band.index));
  }
  return band.center_hz + static_cast<double>(k) * band.spacing_hz;
}

namespace detail {

inline double max_phase_error(std::span<const double> freqs, double delay) {
  double worst = 0.0;
  for (double f : freqs) worst = std::max(worst, angular_distance(kTwoPi * f * delay, 0.0));
  return worst;
}

}  // namespace detail

struct AmbiguitySearch {
  double phase_tolerance = 0.1;  // rad
  double grid_step = 0.05e-9;    // s
  double max_delay = 10e-6;      // s; returned when no ambiguity is found
};

// Delays are compared on the grid {k * grid_step}. Two delays collide when
// every band center maps their separation to a phase within tolerance of
// zero; the result is the smallest colliding separation of at least one
// grid step. Adding bands can only remove collisions, so the range is
// monotone in the plan.
inline double unambiguous_range(const BandPlan& plan, const AmbiguitySearch& search) {
  if (plan.empty()) throw Error(ErrorCode::InvalidArgument, "empty band plan");
  if (!(search.grid_step > 0.0) || !(search.max_delay > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "ambiguity search needs positive step and horizon");
  }
  const auto freqs = plan.center_frequencies();
  const auto steps = static_cast<std::int64_t>(std::floor(search.max_delay / search.grid_step));
  for (std::int64_t k = 1; k <= steps; ++k) {
    const double delta = static_cast<double>(k) * search.grid_step;
    if (detail::max_phase_error(freqs, delta) < search.phase_tolerance) return delta;
  }
  return search.max_delay;
}

inline double unambiguous_range(const BandPlan& plan, double phase_tolerance) {
  AmbiguitySearch search;
  search.phase_tolerance = phase_tolerance;
  return unambiguous_range(plan, search);
}

}  // namespace mbtof
