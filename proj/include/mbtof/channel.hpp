#pragma once

// Ground-truth multipath geometry and synthetic per-subcarrier CSI with
// packet detection delay, carrier frequency offset, the reciprocity
// constant and additive noise.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mbtof/band_plan.hpp"
#include "mbtof/core.hpp"

namespace mbtof {

struct PathComponent {
  double delay = 0.0;  // s
  Complex amplitude{1.0, 0.0};
};

struct Reflector {
  Point2 position;
  Complex coefficient{0.5, 0.0};
};

struct Scene {
  Point2 tx;
  std::vector<Point2> rx_antennas;
  std::vector<Reflector> reflectors;
};

inline void validate(const Scene& scene) {
  if (scene.rx_antennas.empty()) {
    throw Error(ErrorCode::InvalidArgument, "scene needs at least one receive antenna");
  }
  for (std::size_t i = 0; i < scene.rx_antennas.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.rx_antennas.size(); ++j) {
      if (scene.rx_antennas[i] == scene.rx_antennas[j]) {
        throw Error(ErrorCode::InvalidArgument, "receive antennas must be distinct");
      }
    }
  }
}

// Direct path plus one single-bounce path per reflector, sorted by delay.
inline std::vector<PathComponent> paths_from_scene(const Scene& scene, std::size_t antenna) {
  if (antenna >= scene.rx_antennas.size()) {
    throw Error(ErrorCode::InvalidArgument, "antenna index out of range");
  }
  const Point2 rx = scene.rx_antennas[antenna];
  const double direct = distance(scene.tx, rx);
  if (direct < 1e-9) throw Error(ErrorCode::DegenerateGeometry, "tx and rx coincide");

  std::vector<PathComponent> paths;
  paths.push_back({direct / kSpeedOfLight, Complex(1.0 / direct, 0.0)});
  for (const auto& r : scene.reflectors) {
    const double length = distance(scene.tx, r.position) + distance(r.position, rx);
    paths.push_back({length / kSpeedOfLight, r.coefficient / length});
  }
  std::stable_sort(paths.begin(), paths.end(),
                   [](const PathComponent& a, const PathComponent& b) { return a.delay < b.delay; });
  return paths;
}

inline Complex true_channel(const std::vector<PathComponent>& paths, double frequency_hz) {
  Complex h{0.0, 0.0};
  for (const auto& p : paths) h += p.amplitude * std::polar(1.0, -kTwoPi * frequency_hz * p.delay);
  return h;
}

struct ImpairmentConfig {
  double detection_delay_median = 177e-9;  // s
  double detection_delay_stddev = 24.76e-9;
  double cfo_hz = 0.0;         // fixed f_tx - f_rx
  double cfo_ppm = 20.0;       // uniform +-ppm of the carrier, redrawn per hop
  std::optional<double> snr_db;  // nullopt: noiseless
  Complex kappa{1.0, 0.0};
  double fwd_rev_gap = 0.0;     // s between a packet and its ACK
  bool symmetric_gaps = false;  // reverse lands gap before or after forward, 50/50
  double hardware_delay = 0.0;  // s, common to both directions
  int packets_per_band = 3;
  double band_dwell = 2.4e-3;      // s, band-to-band timestamp step
  double packet_spacing = 0.6e-3;  // s between packet exchanges on a band
  bool phase_quirk_24ghz = false;  // 2.4 GHz phase reported modulo pi/2

  static ImpairmentConfig none() {
    ImpairmentConfig c;
    c.detection_delay_median = 0.0;
    c.detection_delay_stddev = 0.0;
    c.cfo_ppm = 0.0;
    c.packets_per_band = 1;
    return c;
  }
};

enum class Direction { Forward, Reverse };

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "reverse"; }

struct CsiMeasurement {
  int band_index = 0;
  Direction direction = Direction::Forward;
  int antenna = 0;
  int packet = 0;
  double timestamp = 0.0;
  std::vector<int> subcarriers;
  ComplexVector values;
};

// Draw from a normal distribution truncated at zero.
inline double draw_detection_delay(std::mt19937_64& rng, const ImpairmentConfig& cfg) {
  if (cfg.detection_delay_stddev <= 0.0) return std::max(0.0, cfg.detection_delay_median);
  std::normal_distribution<double> dist(cfg.detection_delay_median, cfg.detection_delay_stddev);
  for (;;) {
    const double d = dist(rng);
    if (d >= 0.0) return d;
  }
}

namespace detail {

inline void add_noise(ComplexVector& values, double snr_db, std::mt19937_64& rng) {
  double power = 0.0;
  for (const auto& v : values) power += std::norm(v);
  power /= static_cast<double>(values.size());
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : values) v += Complex(noise(rng), noise(rng));
}

}  // namespace detail

// CSI for one packet on one band. `rotation` holds the factors common to
// every subcarrier (offset phase, kappa, firmware quirk).
inline CsiMeasurement synthesize_packet(const std::vector<PathComponent>& paths, const Band& band,
                                        double detection_delay, Complex rotation) {
  CsiMeasurement m;
  m.band_index = band.index;
  m.subcarriers = band.subcarriers;
  m.values.reserve(band.subcarriers.size());
  for (int k : band.subcarriers) {
    const double f = subcarrier_frequency(band, k);
    const double ramp = -kTwoPi * (f - band.center_hz) * detection_delay;
    m.values.push_back(std::polar(1.0, ramp) * true_channel(paths, f) * rotation);
  }
  return m;
}

// Both directions, every band, every antenna; deterministic for a seed.
inline std::vector<CsiMeasurement> synthesize_sweep(const Scene& scene, const BandPlan& plan,
                                                    const ImpairmentConfig& cfg,
                                                    std::uint64_t seed) {
  validate(scene);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> quadrant(0, 3);
  std::bernoulli_distribution coin(0.5);

  std::vector<CsiMeasurement> out;
  for (std::size_t ant = 0; ant < scene.rx_antennas.size(); ++ant) {
    auto paths = paths_from_scene(scene, ant);
    for (auto& p : paths) p.delay += cfg.hardware_delay;

    for (std::size_t b = 0; b < plan.bands.size(); ++b) {
      const Band& band = plan.bands[b];
      const double cfo = cfg.cfo_hz + cfg.cfo_ppm * 1e-6 * band.center_hz * unit(rng);
      Complex quirk{1.0, 0.0};
      if (cfg.phase_quirk_24ghz && is_24ghz(band)) {
        quirk = std::polar(1.0, quadrant(rng) * kPi / 2.0);
      }
      for (int pkt = 0; pkt < cfg.packets_per_band; ++pkt) {
        const double t_fwd = static_cast<double>(b) * cfg.band_dwell + pkt * cfg.packet_spacing;
        double t_rev = t_fwd + cfg.fwd_rev_gap;
        if (cfg.symmetric_gaps && coin(rng)) t_rev = t_fwd - cfg.fwd_rev_gap;

        const double delta_fwd = draw_detection_delay(rng, cfg);
        auto fwd = synthesize_packet(paths, band, delta_fwd,
                                     std::polar(1.0, kTwoPi * cfo * t_fwd) * quirk);
        fwd.direction = Direction::Forward;

        const double delta_rev = draw_detection_delay(rng, cfg);
        auto rev = synthesize_packet(paths, band, delta_rev,
                                     cfg.kappa * std::polar(1.0, -kTwoPi * cfo * t_rev) * quirk);
        rev.direction = Direction::Reverse;

        for (auto* m : {&fwd, &rev}) {
          m->antenna = static_cast<int>(ant);
          m->packet = pkt;
          if (cfg.snr_db) detail::add_noise(m->values, *cfg.snr_db, rng);
        }
        fwd.timestamp = t_fwd;
        rev.timestamp = t_rev;
        out.push_back(std::move(fwd));
        out.push_back(std::move(rev));
      }
    }
  }
  return out;
}

struct RandomSceneParams {
  double room_size = 20.0;     // m, square room
  double min_distance = 1.0;   // m between tx and the rx array center
  double max_distance = 15.0;
  int reflector_count = 4;
  double min_reflection = 0.3;  // |coefficient| range
  double max_reflection = 0.9;
};

// Random indoor scene: tx somewhere in the room, rx array translated to a
// random point, reflectors scattered uniformly over the room.
inline Scene random_scene(std::mt19937_64& rng, const std::vector<Point2>& rx_array,
                          const RandomSceneParams& params) {
  std::uniform_real_distribution<double> coord(0.0, params.room_size);
  std::uniform_real_distribution<double> mag(params.min_reflection, params.max_reflection);
  std::uniform_real_distribution<double> phase(-kPi, kPi);

  Scene scene;
  Point2 centroid;
  for (const auto& a : rx_array) centroid = centroid + a;
  centroid = (1.0 / static_cast<double>(rx_array.size())) * centroid;

  Point2 rx_center;
  for (;;) {
    scene.tx = {coord(rng), coord(rng)};
    rx_center = {coord(rng), coord(rng)};
    const double d = distance(scene.tx, rx_center);
    if (d >= params.min_distance && d <= params.max_distance) break;
  }
  for (const auto& a : rx_array) scene.rx_antennas.push_back(rx_center + (a - centroid));
  for (int i = 0; i < params.reflector_count; ++i) {
    scene.reflectors.push_back({{coord(rng), coord(rng)}, std::polar(mag(rng), phase(rng))});
  }
  return scene;
}

}  // namespace mbtof
