#pragma once

// Distances from per-antenna time-of-flight, geometric outlier rejection and
// planar multilateration by nonlinear least squares on range residuals.

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "mbtof/core.hpp"
#include "mbtof/tof_solver.hpp"

namespace mbtof {

struct DistanceEntry {
  int rx = 0;  // receive antenna index
  int tx = 0;  // transmit antenna index
  double meters = 0.0;
  double confidence = 1.0;
};

using DistanceSet = std::vector<DistanceEntry>;

struct Position2D {
  double x = 0.0;
  double y = 0.0;
  double residual = 0.0;  // RMS circle misfit, m

  Point2 point() const { return {x, y}; }
};

// One entry per estimate, rx = position in the span, tx = 0.
inline DistanceSet distances_from_tofs(std::span<const ToFEstimate> estimates,
                                       double calibration_offset = 0.0) {
  DistanceSet out;
  out.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double m = kSpeedOfLight * (estimates[i].seconds - calibration_offset);
    out.push_back({static_cast<int>(i), 0, std::max(0.0, m), estimates[i].peak_magnitude});
  }
  return out;
}

struct OutlierConfig {
  double slack_fraction = 0.1;  // of the baseline
  double slack_meters = 0.1;
};

namespace detail {

inline const Point2& antenna_at(std::span<const Point2> antennas, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= antennas.size()) {
    throw Error(ErrorCode::InvalidArgument, "antenna index " + std::to_string(index) + " out of range");
  }
  return antennas[static_cast<std::size_t>(index)];
}

// Known baseline between two entries that share one end, if any.
inline std::optional<double> shared_baseline(const DistanceEntry& a, const DistanceEntry& b,
                                             std::span<const Point2> rx,
                                             std::span<const Point2> tx) {
  if (a.tx == b.tx && a.rx != b.rx) return distance(antenna_at(rx, a.rx), antenna_at(rx, b.rx));
  if (a.rx == b.rx && a.tx != b.tx) return distance(antenna_at(tx, a.tx), antenna_at(tx, b.tx));
  return std::nullopt;
}

}  // namespace detail

// Drops, one at a time, the entry that breaks the most |d1 - d2| <= b + slack
// constraints (lowest confidence first on ties) until the set is consistent.
inline DistanceSet geometric_outlier_reject(DistanceSet d, std::span<const Point2> rx_antennas,
                                            std::span<const Point2> tx_antennas,
                                            const OutlierConfig& cfg = {}) {
  for (;;) {
    std::vector<int> violations(d.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = i + 1; j < d.size(); ++j) {
        const auto b = detail::shared_baseline(d[i], d[j], rx_antennas, tx_antennas);
        if (!b) continue;
        if (std::abs(d[i].meters - d[j].meters) > *b * (1.0 + cfg.slack_fraction) + cfg.slack_meters) {
          ++violations[i];
          ++violations[j];
          any = true;
        }
      }
    }
    if (!any) break;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (violations[i] > violations[worst] ||
          (violations[i] == violations[worst] && d[i].confidence < d[worst].confidence)) {
        worst = i;
      }
    }
    d.erase(d.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  if (d.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "fewer than 2 geometrically consistent distances");
  }
  return d;
}

inline DistanceSet geometric_outlier_reject(const DistanceSet& d, std::span<const Point2> rx_antennas,
                                            const OutlierConfig& cfg = {}) {
  const std::array<Point2, 1> single_tx{};
  return geometric_outlier_reject(d, rx_antennas, single_tx, cfg);
}

struct LocalizeConfig {
  int starts = 8;
  double start_radius = 0.0;  // m around the centroid; 0: mean measured distance
  bool weight_by_confidence = false;
  double collinear_tolerance = 1e-9;  // m, max anchor offset from the fitted axis
};

struct LocalizationResult {
  Position2D position;
  std::optional<Position2D> mirror;  // set for two or collinear anchors
};

namespace detail {

struct RangeResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::vector<Point2> anchors;
  std::vector<double> ranges;
  std::vector<double> weights;

  int inputs() const { return 2; }
  int values() const { return static_cast<int>(anchors.size()); }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const double dist = std::hypot(x[0] - anchors[j].x, x[1] - anchors[j].y);
      r[static_cast<Eigen::Index>(j)] = weights[j] * (dist - ranges[j]);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const double dx = x[0] - anchors[j].x;
      const double dy = x[1] - anchors[j].y;
      const double dist = std::max(std::hypot(dx, dy), 1e-12);
      const auto row = static_cast<Eigen::Index>(j);
      jac(row, 0) = weights[j] * dx / dist;
      jac(row, 1) = weights[j] * dy / dist;
    }
    return 0;
  }
};

inline double rms_misfit(Point2 p, std::span<const Point2> anchors, std::span<const double> ranges) {
  double s = 0.0;
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    const double r = distance(p, anchors[j]) - ranges[j];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(anchors.size()));
}

// Principal axis through the anchors: (point on axis, unit direction).
inline std::pair<Point2, Point2> anchor_axis(std::span<const Point2> anchors) {
  Point2 c;
  for (const auto& a : anchors) c = c + a;
  c = (1.0 / static_cast<double>(anchors.size())) * c;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& a : anchors) {
    const Point2 d = a - c;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  return {c, {std::cos(angle), std::sin(angle)}};
}

inline Point2 reflect(Point2 p, Point2 origin, Point2 dir) {
  const Point2 d = p - origin;
  const double along = d.x * dir.x + d.y * dir.y;
  const Point2 foot = origin + along * dir;
  return foot + (-1.0) * (p - foot);
}

}  // namespace detail

// Minimizes sum_j w_j^2 (|x - a_j| - d_j)^2 with Levenberg-Marquardt from
// `starts` points on a circle around the anchor centroid; keeps the best.
inline LocalizationResult localize(const DistanceSet& d, std::span<const Point2> rx_antennas,
                                   const LocalizeConfig& cfg = {}) {
  detail::RangeResiduals fn;
  std::set<int> distinct;
  for (const auto& e : d) {
    fn.anchors.push_back(detail::antenna_at(rx_antennas, e.rx));
    fn.ranges.push_back(e.meters);
    fn.weights.push_back(cfg.weight_by_confidence ? std::max(e.confidence, 0.0) : 1.0);
    distinct.insert(e.rx);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need distances to at least 2 distinct anchors");
  }
  if (cfg.starts < 1) throw Error(ErrorCode::InvalidArgument, "need at least one start");

  const auto [origin, axis] = detail::anchor_axis(fn.anchors);
  double mean_range = 0.0;
  for (double r : fn.ranges) mean_range += r;
  mean_range /= static_cast<double>(fn.ranges.size());
  const double radius = cfg.start_radius > 0.0 ? cfg.start_radius : std::max(mean_range, 0.1);

  std::optional<Point2> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s < cfg.starts; ++s) {
    const double angle = kTwoPi * s / cfg.starts + kPi / 8.0;
    Eigen::VectorXd x(2);
    x << origin.x + radius * std::cos(angle), origin.y + radius * std::sin(angle);
    Eigen::LevenbergMarquardt<detail::RangeResiduals> lm(fn);
    const auto status = lm.minimize(x);
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters || !x.allFinite()) continue;
    const Point2 p{x[0], x[1]};
    const double cost = detail::rms_misfit(p, fn.anchors, fn.ranges);
    if (cost < best_cost) {
      best_cost = cost;
      best = p;
    }
  }
  if (!best) throw Error(ErrorCode::LocalizationFailed, "no start converged");

  LocalizationResult out;
  out.position = {best->x, best->y, best_cost};
  double off_axis = 0.0;
  for (const auto& a : fn.anchors) {
    const Point2 v = a - origin;
    off_axis = std::max(off_axis, std::abs(v.x * axis.y - v.y * axis.x));
  }
  if (distinct.size() == 2 || off_axis <= cfg.collinear_tolerance) {
    const Point2 m = detail::reflect(*best, origin, axis);
    out.mirror = Position2D{m.x, m.y, detail::rms_misfit(m, fn.anchors, fn.ranges)};
  }
  return out;
}

struct MotionPick {
  Position2D position;
  std::size_t index = 0;
  bool tie = false;
};

// The observer at `reference` moves by `movement` and measures
// `post_move_distance`; picks the candidate that predicts it best.
inline MotionPick disambiguate_by_motion(const std::array<Position2D, 2>& candidates,
                                         Point2 reference, Point2 movement,
                                         double post_move_distance, double tie_tolerance = 1e-9) {
  const Point2 moved = reference + movement;
  std::array<double, 2> err{};
  for (std::size_t i = 0; i < 2; ++i) {
    err[i] = std::abs(distance(candidates[i].point(), moved) - post_move_distance);
  }
  MotionPick pick;
  pick.tie = std::abs(err[0] - err[1]) <= tie_tolerance;
  pick.index = (!pick.tie && err[1] < err[0]) ? 1 : 0;
  pick.position = candidates[pick.index];
  return pick;
}

}  // namespace mbtof
