#pragma once

// Lumped model of the fan-pressurized chamber with a voltage-controlled
// exit valve.
//
// Interfaces carry flow in L/s and pressure in Pa; all physics below
// converts flow to m^3/s first. The chamber is a single compliance:
//
//   dp/dt = (K / V) * (q_in(p) - q_out(p, A(v)))
//
// with q_in the fan curve read backwards and q_out = A * sqrt(2 p / rho)
// from Bernoulli at the valve exit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "infrachamber/signal.hpp"

namespace infrachamber {

inline constexpr double kLitersPerCubicMeter = 1000.0;
inline constexpr double kValveOpenVolts = -5.0;
inline constexpr double kValveClosedVolts = 5.0;
inline constexpr double kOperatingPointTolerancePa = 1e-6;

inline double lps_to_m3s(double q_lps) { return q_lps / kLitersPerCubicMeter; }
inline double m3s_to_lps(double q_m3s) { return q_m3s * kLitersPerCubicMeter; }

// Bisection on a decreasing function f over [lo, hi] with f(lo) >= 0 >= f(hi).
// Runs until the bracket stops shrinking in floating point.
template <class F>
double bisect_decreasing(F&& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Steady-state pressure/flow capability of the air source.
class FanCurve {
 public:
  struct Parametric {
    double p_max_pa;
    double q_max_lps;
    double exponent;
  };
  struct Point {
    double q_lps;
    double p_pa;
  };

  /// p(q) = p_max * (1 - (q / q_max)^exponent)
  static FanCurve parametric(double p_max_pa, double q_max_lps, double exponent = 2.0) {
    if (!(p_max_pa > 0.0) || !(q_max_lps > 0.0) || !(exponent > 0.0))
      throw std::invalid_argument("parametric fan curve needs positive p_max, q_max and exponent");
    return FanCurve(Parametric{p_max_pa, q_max_lps, exponent});
  }

  /// Linear interpolation through measured (q, p) points. The end segments are
  /// extended to meet the pressure axis (q = 0) and the flow axis (p = 0).
  static FanCurve tabulated(std::vector<Point> points) {
    if (points.size() < 2) throw std::invalid_argument("tabulated fan curve needs at least two points");
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.q_lps < b.q_lps; });
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (!(points[i].q_lps > points[i - 1].q_lps) || !(points[i].p_pa < points[i - 1].p_pa))
        throw std::invalid_argument("tabulated fan curve must be strictly decreasing (q=" +
                                    std::to_string(points[i].q_lps) + " L/s)");
    }
    if (points.front().q_lps < 0.0 || points.back().p_pa < 0.0)
      throw std::invalid_argument("tabulated fan curve must lie in q >= 0, p >= 0");

    if (points.front().q_lps > 0.0) {
      const Point& a = points[0];
      const Point& b = points[1];
      const double slope = (b.p_pa - a.p_pa) / (b.q_lps - a.q_lps);
      points.insert(points.begin(), Point{0.0, a.p_pa - slope * a.q_lps});
    }
    if (points.back().p_pa > 0.0) {
      const Point& a = points[points.size() - 2];
      const Point& b = points.back();
      const double slope = (b.p_pa - a.p_pa) / (b.q_lps - a.q_lps);
      points.push_back(Point{b.q_lps - b.p_pa / slope, 0.0});
    }
    return FanCurve(std::move(points));
  }

  double p_max() const {
    if (const auto* p = std::get_if<Parametric>(&shape_)) return p->p_max_pa;
    return std::get<std::vector<Point>>(shape_).front().p_pa;
  }

  double q_max() const {
    if (const auto* p = std::get_if<Parametric>(&shape_)) return p->q_max_lps;
    return std::get<std::vector<Point>>(shape_).back().q_lps;
  }

  bool is_parametric() const { return std::holds_alternative<Parametric>(shape_); }
  const Parametric* parameters() const { return std::get_if<Parametric>(&shape_); }
  const std::vector<Point>* table() const { return std::get_if<std::vector<Point>>(&shape_); }

  /// Pressure the fan delivers at flow q (L/s). Clamped to [0, q_max].
  double pressure_at(double q_lps) const {
    const double q = std::clamp(q_lps, 0.0, q_max());
    if (const auto* p = std::get_if<Parametric>(&shape_))
      return p->p_max_pa * (1.0 - std::pow(q / p->q_max_lps, p->exponent));
    const auto& pts = std::get<std::vector<Point>>(shape_);
    auto hi = std::lower_bound(pts.begin(), pts.end(), q, [](const Point& pt, double key) { return pt.q_lps < key; });
    if (hi == pts.begin()) return hi->p_pa;
    if (hi == pts.end()) return pts.back().p_pa;
    auto lo = hi - 1;
    const double t = (q - lo->q_lps) / (hi->q_lps - lo->q_lps);
    return lo->p_pa + t * (hi->p_pa - lo->p_pa);
  }

  /// Flow (L/s) at which the fan delivers pressure p; the curve read backwards.
  double flow_at(double p_pa) const {
    if (p_pa >= p_max()) return 0.0;
    if (p_pa <= 0.0) return q_max();
    return bisect_decreasing([&](double q) { return pressure_at(q) - p_pa; }, 0.0, q_max());
  }

 private:
  explicit FanCurve(std::variant<Parametric, std::vector<Point>> shape) : shape_(std::move(shape)) {}
  std::variant<Parametric, std::vector<Point>> shape_;
};

/// Modulator voltage to effective orifice area, piecewise linear.
class ValveMap {
 public:
  struct Point {
    double volts;
    double area_m2;
  };

  explicit ValveMap(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("valve map needs at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!(points_[i].area_m2 >= 0.0)) throw std::invalid_argument("valve area must be non-negative");
      if (i == 0) continue;
      if (!(points_[i].volts > points_[i - 1].volts))
        throw std::invalid_argument("valve map voltages must be strictly increasing");
      if (!(points_[i].area_m2 < points_[i - 1].area_m2))
        throw std::invalid_argument("valve area must decrease as voltage increases (at " +
                                    std::to_string(points_[i].volts) + " V)");
    }
    if (points_.front().volts > kValveOpenVolts || points_.back().volts < kValveClosedVolts)
      throw std::invalid_argument("valve map must cover the full -5 V to +5 V range");
    for (std::size_t i = 0; i + 1 < points_.size(); ++i)
      if (points_[i].area_m2 == 0.0 && points_[i].volts < kValveClosedVolts)
        throw std::invalid_argument("valve area may only reach zero at full close");
  }

  const std::vector<Point>& points() const { return points_; }

  /// Area at v, with v clamped into [-5, +5] V.
  double area_at(double volts) const {
    const double v = std::clamp(volts, kValveOpenVolts, kValveClosedVolts);
    auto hi = std::lower_bound(points_.begin(), points_.end(), v,
                               [](const Point& pt, double key) { return pt.volts < key; });
    if (hi == points_.begin()) return hi->area_m2;
    if (hi == points_.end()) return points_.back().area_m2;
    auto lo = hi - 1;
    const double t = (v - lo->volts) / (hi->volts - lo->volts);
    return lo->area_m2 + t * (hi->area_m2 - lo->area_m2);
  }

 private:
  std::vector<Point> points_;
};

struct ChamberModel {
  FanCurve fan;
  ValveMap valve;
  double volume_m3 = 1.25;
  double rho = 1.225;
  // Bulk stiffness n * P0 of the enclosed air; isothermal by default.
  double gamma_p0 = 101325.0;
  double inlet_diameter_m = 0.0762;
  double baratron_pa_per_volt = 50.0;

  void validate() const {
    if (!(volume_m3 > 0.0)) throw std::invalid_argument("chamber volume must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("air density must be positive");
    if (!(gamma_p0 > 0.0)) throw std::invalid_argument("bulk stiffness must be positive");
    if (!(inlet_diameter_m > 0.0)) throw std::invalid_argument("inlet diameter must be positive");
    if (!(baratron_pa_per_volt > 0.0)) throw std::invalid_argument("sensor sensitivity must be positive");
  }
};

struct OperatingPoint {
  double pressure_pa = 0.0;
  double flow_lps = 0.0;
};

/// Bernoulli load: 1/2 rho (q / A)^2.
inline double load_pressure(double q_lps, double area_m2, double rho = 1.225) {
  if (q_lps < 0.0) throw std::invalid_argument("flow must be non-negative");
  if (area_m2 < 0.0) throw std::invalid_argument("valve area must be non-negative");
  if (q_lps == 0.0) return 0.0;
  if (area_m2 == 0.0) throw std::invalid_argument("flow through a closed valve needs infinite pressure");
  const double u = lps_to_m3s(q_lps) / area_m2;
  return 0.5 * rho * u * u;
}

/// Airspeed from the dynamic pressure a Pitot tube reads.
inline double pitot_speed(double dynamic_pressure_pa, double rho = 1.225) {
  if (dynamic_pressure_pa < 0.0) throw std::invalid_argument("dynamic pressure must be non-negative");
  return std::sqrt(2.0 * dynamic_pressure_pa / rho);
}

/// Volume flow (L/s) through a round pipe at mean speed u.
inline double flow_from_speed(double speed_ms, double pipe_diameter_m) {
  if (speed_ms < 0.0) throw std::invalid_argument("airspeed must be non-negative");
  if (!(pipe_diameter_m > 0.0)) throw std::invalid_argument("pipe diameter must be positive");
  const double radius = 0.5 * pipe_diameter_m;
  return m3s_to_lps(speed_ms * kPi * radius * radius);
}

/// Orifice area that passes q at load pressure p.
inline double orifice_area(double p_pa, double q_lps, double rho = 1.225) {
  if (!(p_pa > 0.0)) throw std::invalid_argument("orifice pressure must be positive");
  if (q_lps < 0.0) throw std::invalid_argument("flow must be non-negative");
  return lps_to_m3s(q_lps) * std::sqrt(rho / (2.0 * p_pa));
}

inline OperatingPoint solve_operating_point(const ChamberModel& model, double volts) {
  if (!(volts >= kValveOpenVolts && volts <= kValveClosedVolts))
    throw std::invalid_argument("valve voltage " + std::to_string(volts) + " V outside [-5, 5] V");
  const double area = model.valve.area_at(volts);
  if (area == 0.0) return {model.fan.p_max(), 0.0};

  // fan(q) - load(q) falls strictly from p_max at q=0 to -load(q_max) < 0.
  const double q0 = bisect_decreasing(
      [&](double q) { return model.fan.pressure_at(q) - load_pressure(q, area, model.rho); }, 0.0,
      model.fan.q_max());
  return {model.fan.pressure_at(q0), q0};
}

/// |dp/dq| of the fan curve at the operating point, in Pa s/m^3: the
/// resistance R of the local load-line approximation p - p0 = R (q - q0).
inline double local_resistance(const ChamberModel& model, const OperatingPoint& op) {
  const double q_max = model.fan.q_max();
  const double h = 1e-4 * q_max;
  const double q = op.flow_lps;
  double slope = 0.0;  // Pa per L/s
  if (q - h < 0.0)
    slope = (model.fan.pressure_at(q + h) - model.fan.pressure_at(q)) / h;
  else if (q + h > q_max)
    slope = (model.fan.pressure_at(q) - model.fan.pressure_at(q - h)) / h;
  else
    slope = (model.fan.pressure_at(q + h) - model.fan.pressure_at(q - h)) / (2.0 * h);
  return std::abs(slope) * kLitersPerCubicMeter;
}

enum class PressureOutput { pascals, sensor_volts };

struct SimulationOptions {
  PressureOutput output = PressureOutput::pascals;
  // RK4 steps per drive sample; 1 integrates at the drive rate.
  int substeps = 1;
};

struct SimulationResult {
  Waveform pressure;     // Pa, or sensor volts
  Waveform inlet_flow;   // L/s
  std::size_t clamped_drive_samples = 0;
  bool pressure_clamped = false;
};

namespace detail {

inline double chamber_rate(const ChamberModel& model, double p, double area) {
  const double pc = std::max(p, 0.0);
  const double q_in = lps_to_m3s(model.fan.flow_at(pc));
  const double q_out = area * std::sqrt(2.0 * pc / model.rho);
  return model.gamma_p0 / model.volume_m3 * (q_in - q_out);
}

}  // namespace detail

/// Time-domain chamber pressure for a modulator drive, fixed-step RK4.
inline SimulationResult simulate(const ChamberModel& model, const Waveform& drive,
                                 const SimulationOptions& options = {}) {
  model.validate();
  if (drive.unit() != Unit::volts) throw std::invalid_argument("simulator drive must be in volts");
  if (drive.empty()) throw std::invalid_argument("simulator drive is empty");
  if (options.substeps < 1) throw std::invalid_argument("substeps must be >= 1");

  std::size_t clamped = 0;
  std::vector<double> v(drive.samples());
  for (double& x : v) {
    if (x < kValveOpenVolts || x > kValveClosedVolts) {
      ++clamped;
      x = std::clamp(x, kValveOpenVolts, kValveClosedVolts);
    }
  }

  const std::size_t n_samples = v.size();
  const double h = 1.0 / (drive.sample_rate() * options.substeps);
  auto area_at = [&](std::size_t n, double frac) {
    const double volts = (frac == 0.0 || n + 1 >= n_samples) ? v[n] : v[n] + frac * (v[n + 1] - v[n]);
    return model.valve.area_at(volts);
  };

  std::vector<double> pressure(n_samples);
  std::vector<double> flow(n_samples);
  double p = solve_operating_point(model, v[0]).pressure_pa;
  bool flagged = false;
  pressure[0] = p;
  flow[0] = model.fan.flow_at(p);
  for (std::size_t n = 0; n + 1 < n_samples; ++n) {
    for (int s = 0; s < options.substeps; ++s) {
      const double f0 = static_cast<double>(s) / options.substeps;
      const double fh = (s + 0.5) / options.substeps;
      const double f1 = static_cast<double>(s + 1) / options.substeps;
      const double a0 = area_at(n, f0);
      const double ah = area_at(n, fh);
      const double a1 = area_at(n, f1);
      const double k1 = detail::chamber_rate(model, p, a0);
      const double k2 = detail::chamber_rate(model, p + 0.5 * h * k1, ah);
      const double k3 = detail::chamber_rate(model, p + 0.5 * h * k2, ah);
      const double k4 = detail::chamber_rate(model, p + h * k3, a1);
      p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (p < 0.0) {
        p = 0.0;
        flagged = true;
      }
    }
    pressure[n + 1] = p;
    flow[n + 1] = model.fan.flow_at(p);
  }

  Unit unit = Unit::pascals;
  if (options.output == PressureOutput::sensor_volts) {
    for (double& x : pressure) x /= model.baratron_pa_per_volt;
    unit = Unit::volts;
  }
  return {Waveform(std::move(pressure), drive.sample_rate(), unit),
          Waveform(std::move(flow), drive.sample_rate(), Unit::liters_per_second), clamped, flagged};
}

struct CalibrationTarget {
  double volts;
  double pressure_pa;
  double flow_lps;
};

/// Valve map through the areas implied by measured operating points.
///
/// Each target gives A = q sqrt(rho / 2p). Outside the targets the map is
/// closed off linearly to A = 0 at +5 V and continued toward -5 V along the
/// slope of its first segment.
inline ValveMap calibrate_valve_map(std::vector<CalibrationTarget> targets, double rho = 1.225) {
  if (targets.empty()) throw std::invalid_argument("valve calibration needs at least one target");
  std::sort(targets.begin(), targets.end(),
            [](const CalibrationTarget& a, const CalibrationTarget& b) { return a.volts < b.volts; });

  std::vector<ValveMap::Point> points;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (t.volts < kValveOpenVolts || t.volts > kValveClosedVolts)
      throw std::invalid_argument("calibration voltage " + std::to_string(t.volts) + " V outside [-5, 5] V");
    const double area = t.flow_lps == 0.0 ? 0.0 : orifice_area(t.pressure_pa, t.flow_lps, rho);
    if (!points.empty() && !(t.volts > points.back().volts))
      throw std::invalid_argument("duplicate calibration voltage " + std::to_string(t.volts) + " V");
    if (!points.empty() && !(area < points.back().area_m2))
      throw std::invalid_argument("calibration targets at " + std::to_string(points.back().volts) + " V and " +
                                  std::to_string(t.volts) + " V imply a non-decreasing valve area");
    points.push_back({t.volts, area});
  }

  if (points.back().volts < kValveClosedVolts) points.push_back({kValveClosedVolts, 0.0});
  if (points.size() < 2) throw std::invalid_argument("valve calibration needs a target below +5 V");
  if (points.front().volts > kValveOpenVolts) {
    const auto& a = points[0];
    const auto& b = points[1];
    const double slope = (b.area_m2 - a.area_m2) / (b.volts - a.volts);
    points.insert(points.begin(), {kValveOpenVolts, a.area_m2 + slope * (kValveOpenVolts - a.volts)});
  }
  return ValveMap(std::move(points));
}

inline constexpr double kDefaultFanMaxPressurePa = 175.0;
inline constexpr double kDefaultFanMaxFlowLps = 27.5;
inline constexpr double kNeutralVolts = 1.0;
inline constexpr double kNeutralPressurePa = 50.0;
// Area change per volt on the linear band [-1, 3] V around neutral.
inline constexpr double kNeutralValveSlopeM2PerVolt = 8.4e-4;
inline constexpr double kOpenEndPressurePa = 2.0;
inline constexpr double kClosedEndFlowLps = 7.5;

/// Chamber calibrated to the measured operating data: 50 Pa at 1.0 V, a
/// sweep from about 0 Pa / 27.5 L/s at -5 V to about 175 Pa / 7.5 L/s at +5 V.
inline ChamberModel default_chamber_model() {
  const double rho = 1.225;
  FanCurve fan = FanCurve::parametric(kDefaultFanMaxPressurePa, kDefaultFanMaxFlowLps, 2.0);

  const double neutral = orifice_area(kNeutralPressurePa, fan.flow_at(kNeutralPressurePa), rho);
  const double open_end = orifice_area(kOpenEndPressurePa, fan.flow_at(kOpenEndPressurePa), rho);
  const double closed_end = orifice_area(fan.pressure_at(kClosedEndFlowLps), kClosedEndFlowLps, rho);
  const double band = 2.0 * kNeutralValveSlopeM2PerVolt;

  ValveMap valve({{kValveOpenVolts, open_end},
                  {kNeutralVolts - 2.0, neutral + band},
                  {kNeutralVolts, neutral},
                  {kNeutralVolts + 2.0, neutral - band},
                  {kValveClosedVolts, closed_end}});
  return ChamberModel{std::move(fan), std::move(valve)};
}

}  // namespace infrachamber
