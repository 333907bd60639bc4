#pragma once

// Plain CSV export and import for sweeps, profiles, localization trials and
// trajectories. Numbers are written with round-trip precision.

#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mbtof/channel.hpp"
#include "mbtof/core.hpp"
#include "mbtof/follow.hpp"
#include "mbtof/tof_solver.hpp"

namespace mbtof {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::Parse,
              "line " + std::to_string(line) + ", column '" + column + "': not a number: '" + s + "'");
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

inline CsvTable read_csv_table(std::istream& is) {
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(n) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, got " +
                                        std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw Error(ErrorCode::Parse, "empty CSV input");
  return t;
}

inline int require_column(const CsvTable& t, const std::string& name) {
  const int c = t.column(name);
  if (c < 0) throw Error(ErrorCode::Parse, "missing CSV column '" + name + "'");
  return c;
}

class PrecisionGuard {
 public:
  explicit PrecisionGuard(std::ostream& os)
      : os_(os), precision_(os.precision(std::numeric_limits<double>::max_digits10)) {}
  ~PrecisionGuard() { os_.precision(precision_); }

 private:
  std::ostream& os_;
  std::streamsize precision_;
};

}  // namespace detail

// One row per subcarrier value:
// band_index,direction,k,re,im,timestamp,antenna,packet
inline void write_sweep_csv(std::ostream& os, const std::vector<CsiMeasurement>& sweep) {
  detail::PrecisionGuard guard(os);
  os << "band_index,direction,k,re,im,timestamp,antenna,packet\n";
  for (const auto& m : sweep) {
    for (std::size_t i = 0; i < m.subcarriers.size(); ++i) {
      os << m.band_index << ',' << to_string(m.direction) << ',' << m.subcarriers[i] << ','
         << m.values[i].real() << ',' << m.values[i].imag() << ',' << m.timestamp << ','
         << m.antenna << ',' << m.packet << '\n';
    }
  }
}

// Inverse of write_sweep_csv; antenna and packet columns are optional and
// default to 0. Rows are grouped into measurements in first-seen order.
inline std::vector<CsiMeasurement> read_sweep_csv(std::istream& is) {
  const auto t = detail::read_csv_table(is);
  const int c_band = detail::require_column(t, "band_index");
  const int c_dir = detail::require_column(t, "direction");
  const int c_k = detail::require_column(t, "k");
  const int c_re = detail::require_column(t, "re");
  const int c_im = detail::require_column(t, "im");
  const int c_ts = detail::require_column(t, "timestamp");
  const int c_ant = t.column("antenna");
  const int c_pkt = t.column("packet");

  std::vector<CsiMeasurement> out;
  std::map<std::tuple<int, int, int, int>, std::size_t> slot;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.line_numbers[r];
    const auto num = [&](int c) {
      return detail::parse_number(row[static_cast<std::size_t>(c)], line, t.header[static_cast<std::size_t>(c)]);
    };
    Direction dir;
    const auto& d = row[static_cast<std::size_t>(c_dir)];
    if (d == "forward") {
      dir = Direction::Forward;
    } else if (d == "reverse") {
      dir = Direction::Reverse;
    } else {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column 'direction': '" + d +
                                        "' is not forward or reverse");
    }
    const int band = static_cast<int>(num(c_band));
    const int antenna = c_ant >= 0 ? static_cast<int>(num(c_ant)) : 0;
    const int packet = c_pkt >= 0 ? static_cast<int>(num(c_pkt)) : 0;
    const auto key = std::make_tuple(antenna, band, static_cast<int>(dir), packet);
    auto it = slot.find(key);
    if (it == slot.end()) {
      CsiMeasurement m;
      m.band_index = band;
      m.direction = dir;
      m.antenna = antenna;
      m.packet = packet;
      m.timestamp = num(c_ts);
      out.push_back(std::move(m));
      it = slot.emplace(key, out.size() - 1).first;
    }
    auto& m = out[it->second];
    m.subcarriers.push_back(static_cast<int>(num(c_k)));
    m.values.emplace_back(num(c_re), num(c_im));
  }
  return out;
}

// tau_ns,magnitude,phase
inline void write_profile_csv(std::ostream& os, const MultipathProfile& prof) {
  detail::PrecisionGuard guard(os);
  os << "tau_ns,magnitude,phase\n";
  for (std::size_t i = 0; i < prof.p.size(); ++i) {
    os << to_ns(prof.grid.at(i)) << ',' << std::abs(prof.p[i]) << ',' << std::arg(prof.p[i]) << '\n';
  }
}

struct LocalizationRow {
  int trial = 0;
  Point2 truth;
  Point2 estimate;
  double error_m() const { return distance(truth, estimate); }
};

// trial,true_x,true_y,est_x,est_y,error_m
inline void write_localization_csv(std::ostream& os, const std::vector<LocalizationRow>& rows) {
  detail::PrecisionGuard guard(os);
  os << "trial,true_x,true_y,est_x,est_y,error_m\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << r.truth.x << ',' << r.truth.y << ',' << r.estimate.x << ','
       << r.estimate.y << ',' << r.error_m() << '\n';
  }
}

// t,x,y
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  detail::PrecisionGuard guard(os);
  os << "t,x,y\n";
  for (const auto& w : traj) os << w.t << ',' << w.position.x << ',' << w.position.y << '\n';
}

// t,x,y
inline Trajectory read_trajectory_csv(std::istream& is) {
  const auto t = detail::read_csv_table(is);
  const int ct = detail::require_column(t, "t");
  const int cx = detail::require_column(t, "x");
  const int cy = detail::require_column(t, "y");
  Trajectory traj;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.line_numbers[r];
    Waypoint w;
    w.t = detail::parse_number(row[static_cast<std::size_t>(ct)], line, "t");
    w.position = {detail::parse_number(row[static_cast<std::size_t>(cx)], line, "x"),
                  detail::parse_number(row[static_cast<std::size_t>(cy)], line, "y")};
    if (!traj.empty() && !(w.t > traj.back().t)) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": time must increase");
    }
    traj.push_back(w);
  }
  if (traj.empty()) throw Error(ErrorCode::Parse, "trajectory has no rows");
  return traj;
}

}  // namespace mbtof
