#pragma once

// Shared constants, numeric aliases and the library error type.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbtof {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

// Speed of light in m/s
constexpr double kSpeedOfLight = 299792458.0;
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double ns(double v) { return v * 1e-9; }
constexpr double to_ns(double seconds) { return seconds * 1e9; }

enum class ErrorCode {
  InvalidSubcarrier,
  InvalidArgument,
  DegenerateGeometry,
  InsufficientData,
  Calibration,
  InconsistentInput,
  NoPeak,
  LocalizationFailed,
  Parse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSubcarrier: return "invalid-subcarrier";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Calibration: return "calibration";
    case ErrorCode::InconsistentInput: return "inconsistent-input";
    case ErrorCode::NoPeak: return "no-peak";
    case ErrorCode::LocalizationFailed: return "localization-failed";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Wrap an angle into (-pi, pi].
inline double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// Absolute angular distance in [0, pi].
inline double angular_distance(double a, double b) { return std::abs(wrap_phase(a - b)); }

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

}  // namespace mbtof
