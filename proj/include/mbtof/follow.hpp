#pragma once

// Proportional distance-keeping controller for a follower that measures its
// range to a moving device once per control tick.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "mbtof/core.hpp"

namespace mbtof {

struct TrackerConfig {
  double target_distance = 1.4;  // m
  double step_gain = 0.6;
  double max_step = 0.5;        // m per tick
  int window = 12;              // measurements kept
  double outlier_sigma = 3.0;   // in robust standard deviations (1.4826 MAD)
  double control_rate_hz = 12.0;
  // Fit a robust line through the window: the P step acts on its value now
  // and its one-tick change is added as feed-forward.
  bool predict_trend = true;
  int trend_min_samples = 6;  // plain robust mean below this fill level
};

inline void validate(const TrackerConfig& cfg) {
  if (!(cfg.target_distance > 0.0)) throw Error(ErrorCode::InvalidArgument, "target distance must be > 0");
  if (!(cfg.step_gain > 0.0 && cfg.step_gain <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "step gain must be in (0, 1]");
  }
  if (!(cfg.max_step > 0.0) || cfg.window < 1 || !(cfg.outlier_sigma > 0.0) ||
      !(cfg.control_rate_hz > 0.0) || cfg.trend_min_samples < 2) {
    throw Error(ErrorCode::InvalidArgument, "max step, window, outlier sigma and rate must be positive; trend needs >= 2 samples");
  }
}

// Signed step along the follower -> device bearing; positive moves closer.
inline double controller_step(double measured_distance, const TrackerConfig& cfg,
                              double feed_forward = 0.0) {
  const double cmd = cfg.step_gain * (measured_distance - cfg.target_distance) + feed_forward;
  return std::clamp(cmd, -cfg.max_step, cfg.max_step);
}

namespace detail {

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

}  // namespace detail

// Mean of the samples within outlier_sigma robust deviations of the median.
// A zero MAD keeps only samples equal to the median.
inline double robust_distance(std::span<const double> window, const TrackerConfig& cfg) {
  if (window.empty()) throw Error(ErrorCode::InsufficientData, "empty measurement window");
  const std::vector<double> v(window.begin(), window.end());
  const double med = detail::median(v);
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - med));
  const double limit = cfg.outlier_sigma * 1.4826 * detail::median(dev);
  double sum = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::abs(x - med) <= limit) {
      sum += x;
      ++n;
    }
  }
  return sum / n;
}

// Theil-Sen slope of y against t; 0 for fewer than two samples.
inline double robust_slope(std::span<const double> t, std::span<const double> y) {
  std::vector<double> slopes;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      if (t[j] != t[i]) slopes.push_back((y[j] - y[i]) / (t[j] - t[i]));
    }
  }
  return slopes.empty() ? 0.0 : detail::median(std::move(slopes));
}

// Line through the window, fitted by least squares after dropping samples
// whose residual from the Theil-Sen line exceeds outlier_sigma robust
// deviations; evaluated at t_next.
inline double predict_distance(std::span<const double> t, std::span<const double> y, double t_next,
                               const TrackerConfig& cfg) {
  if (t.size() != y.size() || t.empty()) throw Error(ErrorCode::InsufficientData, "empty measurement window");
  const double slope = robust_slope(t, y);
  std::vector<double> resid;
  for (std::size_t i = 0; i < t.size(); ++i) resid.push_back(y[i] - slope * t[i]);
  const double med = detail::median(resid);
  std::vector<double> dev;
  for (double r : resid) dev.push_back(std::abs(r - med));
  const double limit = cfg.outlier_sigma * 1.4826 * detail::median(dev);
  double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(resid[i] - med) > limit) continue;
    const double u = t[i] - t_next;
    n += 1.0;
    st += u;
    sy += y[i];
    stt += u * u;
    sty += u * y[i];
  }
  const double det = n * stt - st * st;
  if (n < 2.0 || det <= 1e-12 * n * stt) return med + slope * t_next;
  return (stt * sy - st * sty) / det;
}

struct Waypoint {
  double t = 0.0;
  Point2 position;
};

using Trajectory = std::vector<Waypoint>;

// Piecewise-linear position, held constant outside the time span.
inline Point2 position_at(const Trajectory& traj, double t) {
  if (traj.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  if (t <= traj.front().t) return traj.front().position;
  if (t >= traj.back().t) return traj.back().position;
  const auto it = std::upper_bound(traj.begin(), traj.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  return a.position + u * (b.position - a.position);
}

inline Trajectory stationary_trajectory(Point2 at, double duration) {
  return {{0.0, at}, {duration, at}};
}

// Straight walk from `start` along `heading` (rad), accelerating at `accel`
// up to `speed`; sampled every `dt`.
inline Trajectory straight_walk(Point2 start, double heading, double speed, double accel,
                                double duration, double dt = 0.01) {
  Trajectory out;
  const Point2 dir{std::cos(heading), std::sin(heading)};
  const double ramp = speed / accel;
  for (double t = 0.0; t <= duration + 1e-12; t += dt) {
    const double s = t < ramp ? 0.5 * accel * t * t : 0.5 * accel * ramp * ramp + speed * (t - ramp);
    out.push_back({t, start + s * dir});
  }
  return out;
}

// Random waypoints inside a square room walked at `speed` with bounded
// acceleration.
inline Trajectory random_walk(std::uint64_t seed, double room, double speed, double accel,
                              double duration, double dt = 0.01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.5, room - 0.5);
  Point2 p{room / 2.0, room / 2.0};
  Point2 v{};
  Point2 goal{coord(rng), coord(rng)};
  Trajectory out{{0.0, p}};
  for (double t = dt; t <= duration + 1e-12; t += dt) {
    if (distance(goal, p) < 0.3) goal = {coord(rng), coord(rng)};
    const Point2 want = (speed / distance(goal, p)) * (goal - p);
    Point2 dv = want - v;
    const double n = norm(dv);
    if (n > accel * dt) dv = (accel * dt / n) * dv;
    v = v + dv;
    p = p + dt * v;
    out.push_back({t, p});
  }
  return out;
}

struct NoiseModel {
  double sigma = 0.15;               // m, Gaussian
  double outlier_probability = 0.0;  // chance a sample is replaced by an outlier
  double outlier_offset = 3.0;       // m added to outlier samples
};

struct FollowTick {
  double t = 0.0;
  Point2 user;
  Point2 follower;
  double true_distance = 0.0;
  double measured = 0.0;
  double estimate = 0.0;
  double command = 0.0;
};

struct FollowResult {
  std::vector<FollowTick> ticks;
  double rmse = 0.0;  // true distance versus target over all ticks
};

// Closed loop at cfg.control_rate_hz for `duration` seconds. Window samples
// are corrected for the follower's own commanded motion since they were
// taken; the bearing to the device is known.
inline FollowResult simulate_follow(const Trajectory& user, Point2 follower_start,
                                    const NoiseModel& noise, const TrackerConfig& cfg,
                                    double duration, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Sample {
    double t;
    double value;
  };
  std::deque<Sample> window;
  FollowResult out;
  Point2 follower = follower_start;
  const double dt = 1.0 / cfg.control_rate_hz;
  const auto ticks = static_cast<int>(std::floor(duration * cfg.control_rate_hz + 1e-9));
  double sq = 0.0;
  for (int k = 0; k <= ticks; ++k) {
    FollowTick tick;
    tick.t = k * dt;
    tick.user = position_at(user, tick.t);
    tick.follower = follower;
    tick.true_distance = distance(tick.user, follower);
    tick.measured = tick.true_distance + noise.sigma * gauss(rng);
    if (noise.outlier_probability > 0.0 && unit(rng) < noise.outlier_probability) {
      tick.measured += noise.outlier_offset;
    }

    window.push_back({tick.t, tick.measured});
    while (static_cast<int>(window.size()) > cfg.window) window.pop_front();
    std::vector<double> ts, ys;
    for (const auto& s : window) {
      ts.push_back(s.t);
      ys.push_back(s.value);
    }
    if (cfg.predict_trend && static_cast<int>(ys.size()) >= cfg.trend_min_samples) {
      tick.estimate = predict_distance(ts, ys, tick.t, cfg);
      const double ahead = predict_distance(ts, ys, tick.t + dt, cfg) - tick.estimate;
      tick.command = controller_step(tick.estimate, cfg, ahead);
    } else {
      tick.estimate = robust_distance(ys, cfg);
      tick.command = controller_step(tick.estimate, cfg);
    }

    const double err = tick.true_distance - cfg.target_distance;
    sq += err * err;
    if (tick.true_distance > 0.0) {
      follower = follower + (tick.command / tick.true_distance) * (tick.user - follower);
    }
    for (auto& s : window) s.value -= tick.command;
    out.ticks.push_back(tick);
  }
  out.rmse = std::sqrt(sq / static_cast<double>(out.ticks.size()));
  return out;
}

}  // namespace mbtof
