#pragma once

// JSON scenario files. Every physical field carries its unit in the name
// (_m, _ns, _us, _ms, _hz, _db, _rad). Unknown fields are rejected.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mbtof/band_plan.hpp"
#include "mbtof/channel.hpp"
#include "mbtof/core.hpp"
#include "mbtof/estimator.hpp"
#include "mbtof/follow.hpp"
#include "mbtof/hop_protocol.hpp"
#include "mbtof/localization.hpp"

namespace mbtof {

using Json = nlohmann::json;

struct RandomSceneSpec {
  RandomSceneParams params;
  std::vector<Point2> rx_array;
};

struct LocalizationSpec {
  OutlierConfig outliers;
  LocalizeConfig solver;
  bool reject_outliers = true;
};

struct TrajectorySpec {
  std::string kind = "straight";  // stationary | straight | random | csv
  Point2 start{1.4, 0.0};
  double heading = 0.0;  // rad
  double speed = 1.0;    // m/s
  double accel = 1.0;    // m/s^2
  double room = 5.0;     // m
  std::string path;      // csv kind
};

struct FollowSpec {
  TrackerConfig tracker;
  NoiseModel noise;
  TrajectorySpec trajectory;
  double duration = 20.0;  // s
  Point2 follower_start{0.0, 0.0};
};

struct Scenario {
  std::filesystem::path base_dir;  // relative paths resolve against this
  BandPlan plan = default_band_plan();
  std::optional<Scene> scene;
  std::optional<RandomSceneSpec> random_scene;
  ImpairmentConfig impairments;
  EstimatorConfig estimator;
  std::optional<CalibrationRecord> calibration;
  std::optional<double> known_distance;  // m, for calibrate
  LocalizationSpec localization;
  ProtocolConfig protocol;
  FollowSpec follow;
  std::map<std::string, Json> bounds;
};

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::Parse, "field '" + path + "': " + what);
}

// Reads the members of one JSON object, tracking which were consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void mark(const std::string& key) { seen_.insert(key); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<T>(j_.at(key), path_of(key));
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    out = convert<T>(j_.at(key), path_of(key));
  }

  // Reads key (scaled by `unit` into SI) when present.
  void read_scaled(const std::string& key, double& out, double unit) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<double>(j_.at(key), path_of(key)) * unit;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) field_error(path_of(it.key()), "unknown field");
    }
  }

  template <typename T>
  static T convert(const Json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) field_error(path, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) field_error(path, "expected an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) field_error(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) field_error(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, Point2>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        field_error(path, "expected [x, y]");
      }
      return Point2{v[0].get<double>(), v[1].get<double>()};
    } else if constexpr (std::is_same_v<T, Complex>) {
      if (v.is_number()) return Complex(v.get<double>(), 0.0);
      ObjectReader r(v, path);
      double re = 0.0, im = 0.0;
      r.read("re", re);
      r.read("im", im);
      r.finish();
      return {re, im};
    } else if constexpr (std::is_same_v<T, std::vector<Point2>>) {
      if (!v.is_array()) field_error(path, "expected a list of [x, y]");
      std::vector<Point2> out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<Point2>(v[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline BandPlan parse_band_plan(const Json& j, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "default") return default_band_plan();
    if (name == "24ghz") return sub_plan_24ghz(default_band_plan());
    field_error(path, "unknown band plan '" + name + "' (use default, 24ghz or a list)");
  }
  if (!j.is_array() || j.empty()) field_error(path, "expected a plan name or a nonempty list of bands");
  BandPlan plan;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    ObjectReader r(j[i], p);
    Band b;
    b.index = static_cast<int>(i);
    b.subcarriers = symmetric_subcarriers();
    r.read("index", b.index);
    r.read("center_hz", b.center_hz);
    r.read("spacing_hz", b.spacing_hz);
    if (r.has("subcarriers")) {
      const auto& ks = r.raw("subcarriers");
      if (!ks.is_array()) field_error(r.path_of("subcarriers"), "expected a list of integers");
      b.subcarriers.clear();
      for (const auto& k : ks) {
        if (!k.is_number_integer()) field_error(r.path_of("subcarriers"), "expected integers");
        b.subcarriers.push_back(k.get<int>());
      }
    } else {
      r.mark("subcarriers");
    }
    r.finish();
    plan.bands.push_back(std::move(b));
  }
  try {
    validate(plan);
  } catch (const Error& e) {
    field_error(path, e.what());
  }
  return plan;
}

inline Scene parse_scene(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  Scene s;
  r.read("tx_m", s.tx);
  r.read("rx_antennas_m", s.rx_antennas);
  if (r.has("reflectors")) {
    const auto& refl = r.raw("reflectors");
    if (!refl.is_array()) field_error(r.path_of("reflectors"), "expected a list");
    for (std::size_t i = 0; i < refl.size(); ++i) {
      ObjectReader rr(refl[i], r.path_of("reflectors") + "[" + std::to_string(i) + "]");
      Reflector x;
      rr.read("position_m", x.position);
      rr.read("coefficient", x.coefficient);
      rr.finish();
      s.reflectors.push_back(x);
    }
  } else {
    r.mark("reflectors");
  }
  r.finish();
  try {
    validate(s);
  } catch (const Error& e) {
    field_error(path, e.what());
  }
  return s;
}

inline CombineMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "forward") return CombineMode::Forward;
  if (s == "reciprocal") return CombineMode::Reciprocal;
  if (s == "quartic") return CombineMode::Quartic;
  field_error(path, "unknown mode '" + s + "' (forward, reciprocal, quartic)");
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Parses text, turning syntax errors into line/column diagnostics.
inline Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::Parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                      ": " + e.what());
  }
}

}  // namespace detail

// Sets a dotted key (a.b.c) to a value parsed as JSON, or as a string when
// it is not valid JSON.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::Parse, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::Parse, "override key '" + key + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw Error(ErrorCode::Parse, "override key '" + key + "' crosses a non-object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline CalibrationRecord parse_calibration(const Json& j, const std::string& path) {
  detail::ObjectReader r(j, path);
  CalibrationRecord c;
  r.read_scaled("offset_ns", c.offset, 1e-9);
  r.read("kappa", c.kappa);
  r.finish();
  return c;
}

inline Json calibration_to_json(const CalibrationRecord& c) {
  return Json{{"offset_ns", to_ns(c.offset)}, {"kappa", {{"re", c.kappa.real()}, {"im", c.kappa.imag()}}}};
}

inline Scenario parse_scenario(const Json& root, const std::filesystem::path& base_dir = {}) {
  using detail::ObjectReader;
  Scenario s;
  s.base_dir = base_dir;
  ObjectReader r(root, "");
  std::string kind;
  r.read("kind", kind);
  std::string description;
  r.read("description", description);

  if (r.has("band_plan")) s.plan = detail::parse_band_plan(r.raw("band_plan"), "band_plan");
  r.mark("band_plan");
  if (r.has("scene")) s.scene = detail::parse_scene(r.raw("scene"), "scene");
  r.mark("scene");

  if (r.has("random_scene")) {
    ObjectReader q(r.raw("random_scene"), "random_scene");
    RandomSceneSpec rs;
    rs.rx_array = {{0.0, 0.0}};
    q.read("room_m", rs.params.room_size);
    q.read("min_distance_m", rs.params.min_distance);
    q.read("max_distance_m", rs.params.max_distance);
    q.read("reflectors", rs.params.reflector_count);
    q.read("min_reflection", rs.params.min_reflection);
    q.read("max_reflection", rs.params.max_reflection);
    q.read("rx_array_m", rs.rx_array);
    q.finish();
    if (rs.rx_array.empty()) detail::field_error("random_scene.rx_array_m", "needs at least one antenna");
    s.random_scene = rs;
  }
  r.mark("random_scene");

  if (r.has("impairments")) {
    ObjectReader q(r.raw("impairments"), "impairments");
    auto& c = s.impairments;
    q.read_scaled("detection_delay_median_ns", c.detection_delay_median, 1e-9);
    q.read_scaled("detection_delay_stddev_ns", c.detection_delay_stddev, 1e-9);
    q.read("cfo_hz", c.cfo_hz);
    q.read("cfo_ppm", c.cfo_ppm);
    q.read_optional("snr_db", c.snr_db);
    q.read("kappa", c.kappa);
    q.read_scaled("fwd_rev_gap_us", c.fwd_rev_gap, 1e-6);
    q.read("symmetric_gaps", c.symmetric_gaps);
    q.read_scaled("hardware_delay_ns", c.hardware_delay, 1e-9);
    q.read("packets_per_band", c.packets_per_band);
    q.read_scaled("band_dwell_ms", c.band_dwell, 1e-3);
    q.read_scaled("packet_spacing_ms", c.packet_spacing, 1e-3);
    q.read("phase_quirk_24ghz", c.phase_quirk_24ghz);
    q.finish();
    if (c.packets_per_band < 1) detail::field_error("impairments.packets_per_band", "must be >= 1");
  }
  r.mark("impairments");

  if (r.has("pipeline")) {
    ObjectReader q(r.raw("pipeline"), "pipeline");
    std::string mode = "reciprocal";
    q.read("mode", mode);
    s.estimator.pipeline.mode = detail::parse_mode(mode, "pipeline.mode");
    q.read("kappa", s.estimator.pipeline.kappa);
    q.finish();
  }
  r.mark("pipeline");

  if (r.has("solver")) {
    ObjectReader q(r.raw("solver"), "solver");
    auto& c = s.estimator.solver;
    q.read_optional("alpha", c.alpha);
    q.read("alpha_scale", c.alpha_scale);
    q.read_optional("epsilon", c.epsilon);
    q.read("epsilon_scale", c.epsilon_scale);
    q.read("max_iters", c.max_iters);
    q.read("peak_threshold_frac", c.peak_threshold_frac);
    std::string method = "ndft";
    q.read("method", method);
    if (method == "ndft") {
      s.estimator.method = Method::Ndft;
    } else if (method == "crt") {
      s.estimator.method = Method::Crt;
    } else {
      detail::field_error("solver.method", "unknown method '" + method + "' (ndft, crt)");
    }
    q.read("crt_tolerance_rad", s.estimator.crt_tolerance);
    q.read_scaled("crt_step_ns", s.estimator.crt_step, 1e-9);
    if (!(s.estimator.crt_step > 0.0)) detail::field_error("solver.crt_step_ns", "must be > 0");
    if (q.has("grid")) {
      ObjectReader g(q.raw("grid"), "solver.grid");
      g.read_scaled("tau_min_ns", s.estimator.grid.tau_min, 1e-9);
      g.read_scaled("tau_max_ns", s.estimator.grid.tau_max, 1e-9);
      g.read_scaled("step_ns", s.estimator.grid.step, 1e-9);
      g.finish();
    }
    q.mark("grid");
    q.finish();
    try {
      validate(c);
      validate(s.estimator.grid);
    } catch (const Error& e) {
      detail::field_error("solver", e.what());
    }
  }
  r.mark("solver");

  if (r.has("calibration")) s.calibration = parse_calibration(r.raw("calibration"), "calibration");
  r.mark("calibration");
  if (r.has("calibration_file")) {
    std::string file;
    r.read("calibration_file", file);
    const auto path = base_dir / file;
    const auto j = detail::parse_json_text(detail::read_text(path), path.string());
    s.calibration = parse_calibration(j, "calibration_file");
  }
  r.mark("calibration_file");
  r.read_optional("known_distance_m", s.known_distance);

  if (r.has("localization")) {
    ObjectReader q(r.raw("localization"), "localization");
    q.read("slack_fraction", s.localization.outliers.slack_fraction);
    q.read("slack_m", s.localization.outliers.slack_meters);
    q.read("starts", s.localization.solver.starts);
    q.read("weight_by_confidence", s.localization.solver.weight_by_confidence);
    q.read("reject_outliers", s.localization.reject_outliers);
    q.finish();
  }
  r.mark("localization");

  if (r.has("protocol")) {
    ObjectReader q(r.raw("protocol"), "protocol");
    auto& c = s.protocol;
    q.read_scaled("dwell_ms", c.dwell, 1e-3);
    q.read_scaled("airtime_us", c.airtime, 1e-6);
    q.read_scaled("ack_turnaround_us", c.ack_turnaround, 1e-6);
    q.read_scaled("ack_timeout_ms", c.ack_timeout, 1e-3);
    q.read_scaled("rx_watchdog_ms", c.rx_watchdog, 1e-3);
    q.read_scaled("retune_latency_us", c.retune_latency, 1e-6);
    q.read("default_band", c.default_band);
    q.read("loss_probability", c.loss_probability);
    q.finish();
    try {
      validate(c);
    } catch (const Error& e) {
      detail::field_error("protocol", e.what());
    }
  }
  r.mark("protocol");

  if (r.has("follow")) {
    ObjectReader q(r.raw("follow"), "follow");
    auto& f = s.follow;
    q.read("target_distance_m", f.tracker.target_distance);
    q.read("step_gain", f.tracker.step_gain);
    q.read("max_step_m", f.tracker.max_step);
    q.read("window", f.tracker.window);
    q.read("outlier_sigma", f.tracker.outlier_sigma);
    q.read("control_rate_hz", f.tracker.control_rate_hz);
    q.read("predict_trend", f.tracker.predict_trend);
    q.read("trend_min_samples", f.tracker.trend_min_samples);
    q.read("noise_sigma_m", f.noise.sigma);
    q.read("outlier_probability", f.noise.outlier_probability);
    q.read("outlier_offset_m", f.noise.outlier_offset);
    q.read("duration_s", f.duration);
    q.read("follower_start_m", f.follower_start);
    if (q.has("trajectory")) {
      ObjectReader t(q.raw("trajectory"), "follow.trajectory");
      t.read("kind", f.trajectory.kind);
      t.read("start_m", f.trajectory.start);
      t.read("heading_rad", f.trajectory.heading);
      t.read("speed_mps", f.trajectory.speed);
      t.read("accel_mps2", f.trajectory.accel);
      t.read("room_m", f.trajectory.room);
      t.read("path", f.trajectory.path);
      t.finish();
      const auto& k = f.trajectory.kind;
      if (k != "stationary" && k != "straight" && k != "random" && k != "csv") {
        detail::field_error("follow.trajectory.kind", "unknown kind '" + k + "'");
      }
    }
    q.mark("trajectory");
    q.finish();
    try {
      validate(f.tracker);
    } catch (const Error& e) {
      detail::field_error("follow", e.what());
    }
  }
  r.mark("follow");

  if (r.has("bounds")) {
    const auto& b = r.raw("bounds");
    if (!b.is_object()) detail::field_error("bounds", "expected an object");
    for (auto it = b.begin(); it != b.end(); ++it) s.bounds[it.key()] = it.value();
  }
  r.mark("bounds");
  r.finish();
  return s;
}

// Reads a scenario file, applying key=value overrides before validation.
inline Scenario load_scenario(const std::filesystem::path& file,
                              const std::vector<std::string>& overrides = {}) {
  Json root = detail::parse_json_text(detail::read_text(file), file.string());
  for (const auto& o : overrides) apply_override(root, o);
  return parse_scenario(root, file.parent_path());
}

}  // namespace mbtof
