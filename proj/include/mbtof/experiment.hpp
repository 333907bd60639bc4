#pragma once

// End-to-end experiments over a scenario: per-trial CSV tables plus a JSON
// summary with median and 95th percentile. Trial i always uses seed
// trial_seed(seed, i), so results do not depend on worker scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mbtof/csv_io.hpp"
#include "mbtof/estimator.hpp"
#include "mbtof/follow.hpp"
#include "mbtof/hop_protocol.hpp"
#include "mbtof/localization.hpp"
#include "mbtof/scenario.hpp"

namespace mbtof {

enum class ExperimentKind { Tof, Profile, Localize, Sweep, Follow, Calibrate };

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "tof") return ExperimentKind::Tof;
  if (s == "profile") return ExperimentKind::Profile;
  if (s == "localize") return ExperimentKind::Localize;
  if (s == "sweep") return ExperimentKind::Sweep;
  if (s == "follow") return ExperimentKind::Follow;
  if (s == "calibrate") return ExperimentKind::Calibrate;
  throw Error(ErrorCode::InvalidArgument, "unknown experiment kind '" + s + "'");
}

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Tof: return "tof";
    case ExperimentKind::Profile: return "profile";
    case ExperimentKind::Localize: return "localize";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Follow: return "follow";
    case ExperimentKind::Calibrate: return "calibrate";
  }
  return "unknown";
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Tof;
  int trials = 1;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: hardware concurrency
};

struct ExperimentOutput {
  std::map<std::string, std::string> files;  // file name -> contents
  Json summary;
  bool bounds_ok = true;
};

// SplitMix64 of (seed, trial): decorrelates neighbouring trial seeds.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Linear-interpolated quantile of unsorted data, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorCode::InsufficientData, "quantile of empty data");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

// Runs body(i) for i in [0, n) on up to `workers` threads. The first
// exception is rethrown after all workers stop.
template <typename Body>
void parallel_for(int n, unsigned workers, Body&& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max(n, 1)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

inline Json stats_json(const std::vector<double>& v) {
  if (v.empty()) return Json{{"count", 0}};
  return Json{{"count", v.size()},
              {"median", median(v)},
              {"p95", quantile(v, 0.95)},
              {"mean", [&] {
                 double s = 0.0;
                 for (double x : v) s += x;
                 return s / static_cast<double>(v.size());
               }()},
              {"max", *std::max_element(v.begin(), v.end())}};
}

// Checks summary value `actual` against bounds[name] (an upper limit).
inline void check_upper(ExperimentOutput& out, const Scenario& s, const std::string& name,
                        double actual) {
  const auto it = s.bounds.find(name);
  if (it == s.bounds.end()) return;
  if (!it->second.is_number()) field_error("bounds." + name, "expected a number");
  const double limit = it->second.get<double>();
  const bool ok = actual <= limit;
  out.summary["bounds"][name] = Json{{"limit", limit}, {"actual", actual}, {"ok", ok}};
  out.bounds_ok = out.bounds_ok && ok;
}

inline void check_unknown_bounds(const Scenario& s, std::initializer_list<const char*> known) {
  for (const auto& [name, value] : s.bounds) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return name == k; })) {
      field_error("bounds." + name, "not a bound of this experiment");
    }
  }
}

inline Scene scene_for_trial(const Scenario& s, std::uint64_t seed) {
  if (s.random_scene) {
    std::mt19937_64 rng(seed);
    return random_scene(rng, s.random_scene->rx_array, s.random_scene->params);
  }
  if (!s.scene) throw Error(ErrorCode::InvalidArgument, "scenario needs 'scene' or 'random_scene'");
  return *s.scene;
}

inline double calibration_offset(const Scenario& s) { return s.calibration ? s.calibration->offset : 0.0; }

inline EstimatorConfig estimator_config(const Scenario& s) {
  EstimatorConfig cfg = s.estimator;
  if (s.calibration) cfg.pipeline.kappa = s.calibration->kappa;
  return cfg;
}

struct TofRow {
  int trial = 0;
  int antenna = 0;
  double truth = 0.0;
  double estimate = 0.0;
  int peaks = 0;
};

inline ExperimentOutput run_tof(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"median_error_ns_max", "p95_error_ns_max"});
  const TofEstimator estimator(s.plan, estimator_config(s));
  const double offset = calibration_offset(s);
  std::vector<std::vector<TofRow>> per_trial(static_cast<std::size_t>(spec.trials));
  parallel_for(spec.trials, spec.workers, [&](int t) {
    const auto seed = trial_seed(spec.seed, static_cast<std::uint64_t>(t));
    const Scene scene = scene_for_trial(s, seed);
    const auto sweep = synthesize_sweep(scene, s.plan, s.impairments, seed ^ 0x5a5a5a5aULL);
    for (std::size_t a = 0; a < scene.rx_antennas.size(); ++a) {
      const auto est = estimator.estimate(sweep, static_cast<int>(a));
      const double truth = paths_from_scene(scene, a).front().delay;
      per_trial[static_cast<std::size_t>(t)].push_back(
          {t, static_cast<int>(a), truth, est.tof.seconds - offset, est.tof.profile_peak_count});
    }
  });

  ExperimentOutput out;
  std::ostringstream csv;
  csv.precision(10);
  csv << "trial,antenna,true_tof_ns,est_tof_ns,error_ns,peak_count\n";
  std::vector<double> errors;
  for (const auto& rows : per_trial) {
    for (const auto& r : rows) {
      const double err = to_ns(r.estimate - r.truth);
      errors.push_back(std::abs(err));
      csv << r.trial << ',' << r.antenna << ',' << to_ns(r.truth) << ',' << to_ns(r.estimate) << ','
          << err << ',' << r.peaks << '\n';
    }
  }
  out.files["tof.csv"] = csv.str();
  out.summary["abs_error_ns"] = stats_json(errors);
  check_upper(out, s, "median_error_ns_max", median(errors));
  check_upper(out, s, "p95_error_ns_max", quantile(errors, 0.95));
  return out;
}

inline ExperimentOutput run_profile(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"expected_peaks_ns", "peak_tolerance_ns", "tof_error_ns_max"});
  EstimatorConfig cfg = estimator_config(s);
  cfg.method = Method::Ndft;
  const TofEstimator estimator(s.plan, cfg);
  const auto seed = trial_seed(spec.seed, 0);
  const Scene scene = scene_for_trial(s, seed);
  const auto sweep = synthesize_sweep(scene, s.plan, s.impairments, seed ^ 0x5a5a5a5aULL);
  const auto est = estimator.estimate(sweep, 0);
  const auto& prof = *est.profile;

  ExperimentOutput out;
  std::ostringstream pcsv;
  write_profile_csv(pcsv, prof);
  out.files["profile.csv"] = pcsv.str();

  auto peaks = find_peaks(prof, cfg.solver.peak_threshold_frac);
  std::ostringstream kcsv;
  kcsv.precision(10);
  kcsv << "tau_ns,tof_ns,magnitude\n";
  Json peak_list = Json::array();
  for (const auto& p : peaks) {
    kcsv << to_ns(p.delay) << ',' << to_ns(p.delay) / prof.exponent << ',' << p.magnitude << '\n';
    peak_list.push_back(Json{{"tau_ns", to_ns(p.delay)}, {"magnitude", p.magnitude}});
  }
  out.files["peaks.csv"] = kcsv.str();

  const double truth = paths_from_scene(scene, 0).front().delay;
  out.summary["exponent"] = prof.exponent;
  out.summary["iterations"] = prof.iterations;
  out.summary["converged"] = prof.converged;
  out.summary["nonzeros"] = prof.nonzeros();
  out.summary["peaks"] = peak_list;
  out.summary["tof_ns"] = to_ns(est.tof.seconds - calibration_offset(s));
  out.summary["true_tof_ns"] = to_ns(truth);
  check_upper(out, s, "tof_error_ns_max", std::abs(to_ns(est.tof.seconds - calibration_offset(s) - truth)));

  const auto expected = s.bounds.find("expected_peaks_ns");
  if (expected != s.bounds.end()) {
    if (!expected->second.is_array()) field_error("bounds.expected_peaks_ns", "expected a list");
    const auto tol_it = s.bounds.find("peak_tolerance_ns");
    const double tol = tol_it != s.bounds.end() ? tol_it->second.get<double>() : 0.5;
    std::sort(peaks.begin(), peaks.end(),
              [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
    const std::size_t k = expected->second.size();
    bool ok = peaks.size() >= k;
    double worst = 0.0;
    for (std::size_t i = 0; ok && i < k; ++i) {
      const double want = expected->second[i].get<double>();
      double nearest = 1e300;
      for (std::size_t j = 0; j < k; ++j) nearest = std::min(nearest, std::abs(to_ns(peaks[j].delay) - want));
      worst = std::max(worst, nearest);
      ok = nearest <= tol;
    }
    out.summary["bounds"]["expected_peaks_ns"] =
        Json{{"tolerance", tol}, {"worst_ns", worst}, {"ok", ok}};
    out.bounds_ok = out.bounds_ok && ok;
  }
  return out;
}

inline ExperimentOutput run_localize(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"median_error_m_max", "p95_error_m_max"});
  const TofEstimator estimator(s.plan, estimator_config(s));
  const double offset = calibration_offset(s);
  std::vector<LocalizationRow> rows(static_cast<std::size_t>(spec.trials));
  std::vector<int> failed(static_cast<std::size_t>(spec.trials), 0);
  parallel_for(spec.trials, spec.workers, [&](int t) {
    const auto seed = trial_seed(spec.seed, static_cast<std::uint64_t>(t));
    const Scene scene = scene_for_trial(s, seed);
    const auto sweep = synthesize_sweep(scene, s.plan, s.impairments, seed ^ 0x5a5a5a5aULL);
    std::vector<ToFEstimate> tofs;
    for (std::size_t a = 0; a < scene.rx_antennas.size(); ++a) {
      tofs.push_back(estimator.estimate(sweep, static_cast<int>(a)).tof);
    }
    auto& row = rows[static_cast<std::size_t>(t)];
    row.trial = t;
    row.truth = scene.tx;
    try {
      DistanceSet d = distances_from_tofs(tofs, offset);
      if (s.localization.reject_outliers) {
        try {
          d = geometric_outlier_reject(d, scene.rx_antennas, s.localization.outliers);
        } catch (const Error& e) {
          // no consistent pair survives: fit every distance
          if (e.code() != ErrorCode::InsufficientData) throw;
        }
      }
      row.estimate = localize(d, scene.rx_antennas, s.localization.solver).position.point();
    } catch (const Error&) {
      failed[static_cast<std::size_t>(t)] = 1;
      Point2 c;
      for (const auto& a : scene.rx_antennas) c = c + a;
      row.estimate = (1.0 / static_cast<double>(scene.rx_antennas.size())) * c;
    }
  });

  ExperimentOutput out;
  std::ostringstream csv;
  write_localization_csv(csv, rows);
  out.files["localization.csv"] = csv.str();
  std::vector<double> errors;
  for (const auto& r : rows) errors.push_back(r.error_m());
  std::ostringstream cdf;
  cdf.precision(10);
  cdf << "quantile,error_m\n";
  for (int q = 0; q <= 100; ++q) cdf << q / 100.0 << ',' << quantile(errors, q / 100.0) << '\n';
  out.files["localization_cdf.csv"] = cdf.str();
  out.summary["error_m"] = stats_json(errors);
  out.summary["failed_trials"] = std::count(failed.begin(), failed.end(), 1);
  check_upper(out, s, "median_error_m_max", median(errors));
  check_upper(out, s, "p95_error_m_max", quantile(errors, 0.95));
  return out;
}

inline ExperimentOutput run_sweep_experiment(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"median_duration_ms_max", "p95_duration_ms_max"});
  std::vector<SweepTrace> traces(static_cast<std::size_t>(spec.trials));
  parallel_for(spec.trials, spec.workers, [&](int t) {
    traces[static_cast<std::size_t>(t)] =
        run_sweep(s.plan, s.protocol, trial_seed(spec.seed, static_cast<std::uint64_t>(t)));
  });

  ExperimentOutput out;
  std::ostringstream csv;
  csv.precision(10);
  csv << "trial,duration_ms,timeouts,rx_timeouts,captures,synchronized\n";
  std::vector<double> durations;
  int unsynchronized = 0;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& tr = traces[t];
    durations.push_back(tr.total_duration * 1e3);
    if (!tr.synchronized) ++unsynchronized;
    csv << t << ',' << tr.total_duration * 1e3 << ',' << tr.timeouts << ',' << tr.rx_timeouts << ','
        << tr.captures.size() << ',' << (tr.synchronized ? 1 : 0) << '\n';
  }
  out.files["sweeps.csv"] = csv.str();
  std::ostringstream trace;
  trace.precision(10);
  write_trace_csv(trace, traces.front());
  out.files["trace.csv"] = trace.str();
  std::ostringstream cdf;
  cdf.precision(10);
  cdf << "quantile,duration_ms\n";
  for (int q = 0; q <= 100; ++q) cdf << q / 100.0 << ',' << quantile(durations, q / 100.0) << '\n';
  out.files["sweep_cdf.csv"] = cdf.str();
  out.summary["duration_ms"] = stats_json(durations);
  out.summary["unsynchronized_trials"] = unsynchronized;
  out.bounds_ok = unsynchronized == 0;
  check_upper(out, s, "median_duration_ms_max", median(durations));
  check_upper(out, s, "p95_duration_ms_max", quantile(durations, 0.95));
  return out;
}

inline Trajectory trajectory_for(const Scenario& s, std::uint64_t seed) {
  const auto& t = s.follow.trajectory;
  const double d = s.follow.duration + 1.0;
  if (t.kind == "stationary") return stationary_trajectory(t.start, d);
  if (t.kind == "straight") return straight_walk(t.start, t.heading, t.speed, t.accel, d);
  if (t.kind == "random") return random_walk(seed, t.room, t.speed, t.accel, d);
  std::istringstream in(read_text(s.base_dir / t.path));
  return read_trajectory_csv(in);
}

inline ExperimentOutput run_follow(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"median_rmse_m_max"});
  std::vector<FollowResult> results(static_cast<std::size_t>(spec.trials));
  std::vector<Trajectory> trajectories(static_cast<std::size_t>(spec.trials));
  parallel_for(spec.trials, spec.workers, [&](int t) {
    const auto seed = trial_seed(spec.seed, static_cast<std::uint64_t>(t));
    auto& traj = trajectories[static_cast<std::size_t>(t)];
    traj = trajectory_for(s, seed);
    Point2 start = s.follow.follower_start;
    if (s.follow.trajectory.kind == "random" || s.follow.trajectory.kind == "csv") {
      start = traj.front().position - Point2{s.follow.tracker.target_distance, 0.0};
    }
    results[static_cast<std::size_t>(t)] =
        simulate_follow(traj, start, s.follow.noise, s.follow.tracker, s.follow.duration, seed);
  });

  ExperimentOutput out;
  std::ostringstream ticks;
  ticks.precision(10);
  ticks << "t,x,y,user_x,user_y,true_distance,measured,estimate,command\n";
  for (const auto& k : results.front().ticks) {
    ticks << k.t << ',' << k.follower.x << ',' << k.follower.y << ',' << k.user.x << ',' << k.user.y
          << ',' << k.true_distance << ',' << k.measured << ',' << k.estimate << ',' << k.command << '\n';
  }
  out.files["follow_trace.csv"] = ticks.str();
  std::ostringstream user;
  user.precision(10);
  user << "t,x,y\n";
  for (const auto& k : results.front().ticks) user << k.t << ',' << k.user.x << ',' << k.user.y << '\n';
  out.files["user_trajectory.csv"] = user.str();

  std::ostringstream csv;
  csv.precision(10);
  csv << "trial,rmse_m\n";
  std::vector<double> rmse;
  for (std::size_t t = 0; t < results.size(); ++t) {
    rmse.push_back(results[t].rmse);
    csv << t << ',' << results[t].rmse << '\n';
  }
  out.files["follow.csv"] = csv.str();
  out.summary["rmse_m"] = stats_json(rmse);
  check_upper(out, s, "median_rmse_m_max", median(rmse));
  return out;
}

inline ExperimentOutput run_calibrate(const Scenario& s, const ExperimentSpec& spec) {
  check_unknown_bounds(s, {"offset_error_ns_max"});
  if (!s.scene) throw Error(ErrorCode::InvalidArgument, "calibrate needs a fixed 'scene'");
  const double known = s.known_distance ? *s.known_distance : distance(s.scene->tx, s.scene->rx_antennas.front());
  const auto seed = trial_seed(spec.seed, 0);
  const auto sweep = synthesize_sweep(*s.scene, s.plan, s.impairments, seed ^ 0x5a5a5a5aULL);
  const auto rec = calibrate(sweep, s.plan, known, s.estimator);

  ExperimentOutput out;
  out.files["calibration.json"] = calibration_to_json(rec).dump(2) + "\n";
  out.summary["calibration"] = calibration_to_json(rec);
  out.summary["known_distance_m"] = known;
  out.summary["kappa_phase_rad"] = std::arg(rec.kappa);
  check_upper(out, s, "offset_error_ns_max", std::abs(to_ns(rec.offset - s.impairments.hardware_delay)));
  return out;
}

}  // namespace detail

inline ExperimentOutput run(const Scenario& s, const ExperimentSpec& spec) {
  if (spec.trials < 1) throw Error(ErrorCode::InvalidArgument, "trial count must be >= 1");
  ExperimentOutput out;
  switch (spec.kind) {
    case ExperimentKind::Tof: out = detail::run_tof(s, spec); break;
    case ExperimentKind::Profile: out = detail::run_profile(s, spec); break;
    case ExperimentKind::Localize: out = detail::run_localize(s, spec); break;
    case ExperimentKind::Sweep: out = detail::run_sweep_experiment(s, spec); break;
    case ExperimentKind::Follow: out = detail::run_follow(s, spec); break;
    case ExperimentKind::Calibrate: out = detail::run_calibrate(s, spec); break;
  }
  out.summary["experiment"] = to_string(spec.kind);
  out.summary["trials"] = spec.trials;
  out.summary["seed"] = spec.seed;
  out.summary["bounds_ok"] = out.bounds_ok;
  return out;
}

}  // namespace mbtof
