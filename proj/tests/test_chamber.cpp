#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "infrachamber/chamber.hpp"

using namespace infrachamber;

namespace {

ChamberModel model_with_valve(std::vector<ValveMap::Point> points) {
  ChamberModel m = default_chamber_model();
  m.valve = ValveMap(std::move(points));
  return m;
}

Waveform constant_drive(double volts, double seconds, double rate = 1000.0) {
  return Waveform(std::vector<double>(static_cast<std::size_t>(std::llround(seconds * rate)), volts), rate,
                  Unit::volts);
}

// Pressure response to a pure tone on a 1 V offset, settled, over whole periods.
HarmonicSpectrum tone_response(const ChamberModel& m, double f, double amplitude, int max_k, int substeps = 1) {
  const double rate = 1000.0;
  const int periods = 8;
  const double seconds = (periods + 4) / f;
  Waveform drive = synthesize_harmonics(HarmonicSpectrum(f, {{1, amplitude, 0.0}}), seconds, rate, 1.0, Unit::volts);
  SimulationResult r = simulate(m, drive, {PressureOutput::pascals, substeps});
  const auto first = static_cast<std::size_t>(std::llround(4.0 / f * rate));
  return analyze_harmonics(r.pressure.slice(first, r.pressure.size()), f, max_k);
}

}  // namespace

TEST(Physics, FrozenPitotAndPipeFlow) {
  EXPECT_NEAR(pitot_speed(50.0), 9.03507902905251, 1e-12);
  EXPECT_NEAR(flow_from_speed(1.0, 0.0762), 4.56036731187748, 1e-12);
  EXPECT_NEAR(flow_from_speed(9.035, 0.0762), 41.2029186628130, 1e-10);
  EXPECT_DOUBLE_EQ(pitot_speed(0.0), 0.0);
}

TEST(Physics, FrozenLoadPressure) {
  // 90.35 L/s through 0.01 m^2 is 9.035 m/s.
  EXPECT_NEAR(load_pressure(90.35, 0.01), 49.9991253125, 1e-9);
  EXPECT_DOUBLE_EQ(load_pressure(0.0, 0.0), 0.0);
  EXPECT_THROW(load_pressure(1.0, 0.0), std::invalid_argument);
}

TEST(Physics, RejectsNegativeInputs) {
  EXPECT_THROW(pitot_speed(-1.0), std::invalid_argument);
  EXPECT_THROW(flow_from_speed(-1.0, 0.0762), std::invalid_argument);
  EXPECT_THROW(flow_from_speed(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(load_pressure(-1.0, 0.01), std::invalid_argument);
}

TEST(Physics, OrificeInvertsLoad) {
  const double a = orifice_area(50.0, 22.5);
  EXPECT_NEAR(load_pressure(22.5, a), 50.0, 1e-12);
}

TEST(FanCurve, ParametricEndpoints) {
  FanCurve fan = FanCurve::parametric(175.0, 27.5);
  EXPECT_DOUBLE_EQ(fan.pressure_at(0.0), 175.0);
  EXPECT_DOUBLE_EQ(fan.pressure_at(27.5), 0.0);
  EXPECT_DOUBLE_EQ(fan.flow_at(175.0), 0.0);
  EXPECT_DOUBLE_EQ(fan.flow_at(0.0), 27.5);
  EXPECT_NEAR(fan.flow_at(50.0), 23.2417420050342, 1e-9);
}

TEST(FanCurve, TabulatedExtendsToAxes) {
  FanCurve fan = FanCurve::tabulated({{10.0, 80.0}, {5.0, 100.0}, {15.0, 50.0}});
  EXPECT_DOUBLE_EQ(fan.p_max(), 120.0);
  EXPECT_NEAR(fan.q_max(), 15.0 + 50.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(fan.pressure_at(7.5), 90.0);
  EXPECT_NEAR(fan.flow_at(90.0), 7.5, 1e-9);
}

TEST(FanCurve, TabulatedRejectsRisingSegment) {
  EXPECT_THROW(FanCurve::tabulated({{0.0, 100.0}, {5.0, 120.0}}), std::invalid_argument);
  EXPECT_THROW(FanCurve::tabulated({{0.0, 100.0}}), std::invalid_argument);
}

TEST(ValveMap, RejectsNonDecreasingAndShortRange) {
  EXPECT_THROW(ValveMap({{-5.0, 0.01}, {5.0, 0.02}}), std::invalid_argument);
  EXPECT_THROW(ValveMap({{-4.0, 0.01}, {5.0, 0.001}}), std::invalid_argument);
  EXPECT_THROW(ValveMap({{-5.0, 0.01}, {0.0, 0.0}, {5.0, -0.0}}), std::invalid_argument);
}

TEST(ValveMap, ClampsOutsideRange) {
  ValveMap v({{-5.0, 0.01}, {5.0, 0.001}});
  EXPECT_DOUBLE_EQ(v.area_at(-9.0), 0.01);
  EXPECT_DOUBLE_EQ(v.area_at(9.0), 0.001);
  EXPECT_NEAR(v.area_at(0.0), 0.0055, 1e-15);
}

TEST(OperatingPoint, ClosedValveGivesShutoffPressure) {
  ChamberModel m = model_with_valve({{-5.0, 0.01}, {5.0, 0.0}});
  OperatingPoint op = solve_operating_point(m, 5.0);
  EXPECT_DOUBLE_EQ(op.pressure_pa, 175.0);
  EXPECT_DOUBLE_EQ(op.flow_lps, 0.0);
}

TEST(OperatingPoint, WideOpenValveGivesFreeDelivery) {
  ChamberModel m = model_with_valve({{-5.0, 100.0}, {5.0, 50.0}});
  OperatingPoint op = solve_operating_point(m, -5.0);
  EXPECT_LT(op.pressure_pa, 1e-3);
  EXPECT_NEAR(op.flow_lps, 27.5, 1e-3);
}

TEST(OperatingPoint, DefaultNeutral) {
  OperatingPoint op = solve_operating_point(default_chamber_model(), 1.0);
  EXPECT_NEAR(op.pressure_pa, 50.0, 2.0);
  EXPECT_GE(op.flow_lps, 20.0);
  EXPECT_LE(op.flow_lps, 25.0);
  EXPECT_NEAR(op.flow_lps, 23.2417420050342, 1e-6);
}

TEST(OperatingPoint, LiesOnBothCurves) {
  const ChamberModel m = default_chamber_model();
  for (double v = -5.0; v <= 5.0; v += 0.25) {
    OperatingPoint op = solve_operating_point(m, v);
    EXPECT_NEAR(op.pressure_pa, m.fan.pressure_at(op.flow_lps), 1e-9);
    EXPECT_NEAR(op.pressure_pa, load_pressure(op.flow_lps, m.valve.area_at(v)), 1e-6) << v;
  }
}

TEST(OperatingPoint, RejectsOutOfRangeVoltage) {
  EXPECT_THROW(solve_operating_point(default_chamber_model(), 5.5), std::invalid_argument);
  EXPECT_THROW(solve_operating_point(default_chamber_model(), -5.01), std::invalid_argument);
}

TEST(OperatingPoint, PressureRisesMonotonicallyWithVoltage) {
  const ChamberModel m = default_chamber_model();
  double last = -1.0;
  for (double v = -5.0; v <= 5.0 + 1e-12; v += 0.05) {
    const double p = solve_operating_point(m, std::min(v, 5.0)).pressure_pa;
    EXPECT_GT(p, last) << v;
    last = p;
  }
}

TEST(LocalResistance, LinearFanIsPressureOverFlow) {
  ChamberModel m = default_chamber_model();
  m.fan = FanCurve::parametric(175.0, 27.5, 1.0);
  OperatingPoint op = solve_operating_point(m, 1.0);
  EXPECT_NEAR(local_resistance(m, op), 175.0 / 27.5 * 1000.0, 1e-6);
}

TEST(LocalResistance, DefaultMatchesAnalyticSlope) {
  const ChamberModel m = default_chamber_model();
  OperatingPoint op = solve_operating_point(m, 1.0);
  EXPECT_NEAR(local_resistance(m, op), 10756.5086965448, 1e-6 * 10756.5);
}

TEST(Calibrate, SingleTargetArea) {
  ValveMap v = calibrate_valve_map({{1.0, 50.0, 22.5}});
  EXPECT_NEAR(v.area_at(1.0), 0.00249029365738260, 1e-15);
  EXPECT_DOUBLE_EQ(v.area_at(5.0), 0.0);
  EXPECT_GT(v.area_at(-5.0), v.area_at(1.0));
}

TEST(Calibrate, ReproducesTargets) {
  ChamberModel m = default_chamber_model();
  std::vector<CalibrationTarget> targets;
  for (double v : {-3.0, -1.0, 1.0, 2.0, 4.0}) {
    OperatingPoint op = solve_operating_point(m, v);
    targets.push_back({v, op.pressure_pa, op.flow_lps});
  }
  m.valve = calibrate_valve_map(targets);
  for (const auto& t : targets) {
    OperatingPoint op = solve_operating_point(m, t.volts);
    EXPECT_NEAR(op.pressure_pa, t.pressure_pa, 1e-6) << t.volts;
    EXPECT_NEAR(op.flow_lps, t.flow_lps, 1e-6) << t.volts;
  }
}

TEST(Calibrate, RejectsEmptyAndInconsistentTargets) {
  EXPECT_THROW(calibrate_valve_map({}), std::invalid_argument);
  EXPECT_THROW(calibrate_valve_map({{5.0, 175.0, 0.0}}), std::invalid_argument);
  EXPECT_THROW(calibrate_valve_map({{0.0, 50.0, 20.0}, {1.0, 20.0, 25.0}}), std::invalid_argument);
  EXPECT_THROW(calibrate_valve_map({{6.0, 50.0, 20.0}}), std::invalid_argument);
}

TEST(Simulate, StaysAtOperatingPointUnderConstantDrive) {
  const ChamberModel m = default_chamber_model();
  SimulationResult r = simulate(m, constant_drive(1.0, 2.0));
  const double p0 = solve_operating_point(m, 1.0).pressure_pa;
  for (double p : r.pressure.samples()) EXPECT_NEAR(p, p0, 1e-6);
  EXPECT_EQ(r.clamped_drive_samples, 0u);
  EXPECT_FALSE(r.pressure_clamped);
}

TEST(Simulate, StepSettlesToNewOperatingPoint) {
  const ChamberModel m = default_chamber_model();
  std::vector<double> v(3000, 1.0);
  for (std::size_t n = 500; n < v.size(); ++n) v[n] = 3.0;
  SimulationResult r = simulate(m, Waveform(v, 1000.0, Unit::volts));
  const OperatingPoint target = solve_operating_point(m, 3.0);
  EXPECT_NEAR(r.pressure[r.pressure.size() - 1], target.pressure_pa, 1e-3);
  EXPECT_NEAR(r.inlet_flow[r.inlet_flow.size() - 1], target.flow_lps, 1e-3);
  for (std::size_t n = 501; n < v.size(); ++n) EXPECT_GE(r.pressure[n], r.pressure[n - 1] - 1e-9);
}

TEST(Simulate, SensorVoltsScaleBySensitivity) {
  const ChamberModel m = default_chamber_model();
  SimulationResult r = simulate(m, constant_drive(1.0, 0.1), {PressureOutput::sensor_volts, 1});
  EXPECT_EQ(r.pressure.unit(), Unit::volts);
  EXPECT_NEAR(r.pressure[0], 1.0, 1e-9);
}

TEST(Simulate, CountsClampedDriveSamples) {
  const ChamberModel m = default_chamber_model();
  std::vector<double> v(1000, 1.0);
  v[100] = 6.0;
  v[200] = -7.0;
  v[300] = 5.0;
  SimulationResult r = simulate(m, Waveform(v, 1000.0, Unit::volts));
  EXPECT_EQ(r.clamped_drive_samples, 2u);
}

TEST(Simulate, RejectsNonVoltDrive) {
  Waveform w(std::vector<double>(10, 1.0), 1000.0, Unit::pascals);
  EXPECT_THROW(simulate(default_chamber_model(), w), std::invalid_argument);
}

TEST(Simulate, SubstepConvergence) {
  const ChamberModel m = default_chamber_model();
  Waveform drive = stepped_sine(8.0, 20, 0.5, 1.0);
  SimulationResult a = simulate(m, drive, {PressureOutput::pascals, 1});
  SimulationResult b = simulate(m, drive, {PressureOutput::pascals, 2});
  const double mean = b.pressure.mean();
  double diff = 0.0;
  double mod = 0.0;
  for (std::size_t n = 0; n < a.pressure.size(); ++n) {
    diff += std::pow(a.pressure[n] - b.pressure[n], 2);
    mod += std::pow(b.pressure[n] - mean, 2);
  }
  EXPECT_LT(std::sqrt(diff / mod), 1e-6);
}

TEST(Simulate, DistortionShrinksWithDriveAmplitude) {
  const ChamberModel m = default_chamber_model();
  double last = 1.0;
  for (double eps : {2.0, 1.0, 0.5, 0.1}) {
    HarmonicSpectrum s = tone_response(m, 0.8, eps, 6);
    double harm = 0.0;
    for (int k = 2; k <= 6; ++k) harm += s.magnitude(k) * s.magnitude(k);
    const double thd = std::sqrt(harm) / s.magnitude(1);
    EXPECT_LT(thd, last) << eps;
    if (eps <= 0.5) {
      EXPECT_LT(thd, 0.10) << eps;
    }
    last = thd;
  }
}

TEST(Simulate, FirstOrderLowPassShape) {
  const ChamberModel m = default_chamber_model();
  double last_gain = 1e9;
  double last_delay = -1.0;
  for (double f : {0.4, 0.8, 1.6, 3.2, 6.4, 12.8}) {
    HarmonicSpectrum s = tone_response(m, f, 0.25, 1);
    const double delay = -s.components()[0].phase;
    EXPECT_LT(s.magnitude(1), last_gain) << f;
    EXPECT_GT(delay, last_delay) << f;
    EXPECT_GT(delay, 0.0);
    EXPECT_LT(delay, kPi / 2 + 0.05) << f;
    last_gain = s.magnitude(1);
    last_delay = delay;
  }
}
