#pragma once

// Measurement procedures run against any voltage-driven black box: the
// simulator, or a callable replaying recorded hardware data.
//
// A sweep system maps a drive waveform (volts) to SweepTraces; a response
// system maps a drive waveform to an output waveform of the same length and
// rate (sensor volts for the chamber).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infrachamber/chamber.hpp"
#include "infrachamber/signal.hpp"

namespace infrachamber {

struct SweepTraces {
  Waveform pressure;  // Pa
  Waveform flow;      // L/s
};

struct SweepStep {
  double volts = 0.0;
  Waveform pressure;
  Waveform flow;
  double steady_pressure_pa = 0.0;
  double steady_flow_lps = 0.0;
};

struct SweepError {
  std::size_t step_index = 0;
  double volts = 0.0;
  std::string message;
};

struct SweepRecord {
  std::vector<SweepStep> steps;
  double hold_seconds = 10.0;
  std::optional<SweepError> error;  // set when the sweep stopped early
};

struct SweepOptions {
  double v_start = -5.0;
  double v_end = 5.0;
  double step = 0.5;
  double hold_seconds = 10.0;
  double sample_rate = kDefaultSampleRate;
};

template <class S>
concept SweepSystem = std::invocable<S&, const Waveform&> &&
                      std::convertible_to<std::invoke_result_t<S&, const Waveform&>, SweepTraces>;

template <class S>
concept ResponseSystem = std::invocable<S&, const Waveform&> &&
                         std::convertible_to<std::invoke_result_t<S&, const Waveform&>, Waveform>;

/// Mean of the final half of a trace.
inline double settled_mean(const Waveform& trace) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  const std::size_t first = trace.size() / 2;
  double sum = 0.0;
  for (std::size_t n = first; n < trace.size(); ++n) sum += trace[n];
  return sum / static_cast<double>(trace.size() - first);
}

inline std::vector<double> sweep_levels(const SweepOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("sweep step must be positive");
  if (!(options.v_end >= options.v_start)) throw std::invalid_argument("sweep end must not precede its start");
  const auto count = static_cast<std::size_t>(std::floor((options.v_end - options.v_start) / options.step + 1e-9)) + 1;
  std::vector<double> levels(count);
  for (std::size_t i = 0; i < count; ++i) levels[i] = options.v_start + static_cast<double>(i) * options.step;
  return levels;
}

/// Holds each voltage level for hold_seconds and records pressure and flow.
/// A system that throws stops the sweep; the steps recorded so far are
/// returned along with the failing position.
template <SweepSystem System>
SweepRecord static_sweep(System&& system, const SweepOptions& options = {}) {
  if (!(options.hold_seconds > 0.0)) throw std::invalid_argument("hold time must be positive");
  const auto hold_samples = static_cast<std::size_t>(std::llround(options.hold_seconds * options.sample_rate));
  if (hold_samples < 2) throw std::invalid_argument("hold time shorter than two samples");

  SweepRecord record;
  record.hold_seconds = options.hold_seconds;
  const std::vector<double> levels = sweep_levels(options);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double v = levels[i];
    try {
      Waveform drive(std::vector<double>(hold_samples, v), options.sample_rate, Unit::volts);
      SweepTraces traces = system(drive);
      if (traces.pressure.sample_rate() != options.sample_rate || traces.flow.sample_rate() != options.sample_rate)
        throw std::runtime_error("system returned traces at a different sample rate");
      const double p = settled_mean(traces.pressure);
      const double q = settled_mean(traces.flow);
      record.steps.push_back({v, std::move(traces.pressure), std::move(traces.flow), p, q});
    } catch (const std::exception& e) {
      record.error = SweepError{i, v, e.what()};
      break;
    }
  }
  return record;
}

struct CurvePoint {
  double q_lps = 0.0;
  double p_pa = 0.0;
};

/// One (q, p) point per sweep step, ordered by flow.
inline std::vector<CurvePoint> pool_operating_curve(const SweepRecord& record) {
  if (record.steps.empty()) throw std::invalid_argument("sweep record holds no steps");
  std::vector<CurvePoint> points;
  points.reserve(record.steps.size());
  for (const auto& s : record.steps) points.push_back({s.steady_flow_lps, s.steady_pressure_pa});
  std::stable_sort(points.begin(), points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.q_lps < b.q_lps; });
  return points;
}

struct ResponseOptions {
  double f0 = 0.8;
  int max_k = 25;
  double amplitude = 0.5;
  double offset = 1.0;
  double sample_rate = kDefaultSampleRate;
  int cycles = 20;
  int taper_cycles = 2;
  int settle_cycles = 2;
  // Measure harmonics on separate threads; only for pure systems.
  bool concurrent = false;
};

inline constexpr double kResponseNoiseFloor = 1e-9;

/// Analysis window [first, last) in samples: skips the head taper plus the
/// settling cycles, and the tail taper.
inline std::pair<std::size_t, std::size_t> burst_window(double frequency, const ResponseOptions& options) {
  const double rate = options.sample_rate;
  const auto first =
      static_cast<std::size_t>(std::ceil((options.taper_cycles + options.settle_cycles) / frequency * rate - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor((options.cycles - options.taper_cycles) / frequency * rate + 1e-9));
  if (last <= first + 2) throw std::invalid_argument("burst too short to leave an analysis window");
  return {first, last};
}

template <ResponseSystem System>
ResponseEntry measure_harmonic(System& system, int k, const ResponseOptions& options) {
  const double f = options.f0 * k;
  const Waveform drive =
      stepped_sine(f, options.cycles, options.amplitude, options.offset, options.sample_rate, options.taper_cycles);
  const Waveform out = system(drive);
  if (out.size() != drive.size() || out.sample_rate() != drive.sample_rate())
    throw std::runtime_error("system output does not match the drive length and rate at k=" + std::to_string(k));

  const auto [first, last] = burst_window(f, options);
  const std::span<const double> in_window(drive.samples().data() + first, last - first);
  const std::span<const double> out_window(out.samples().data() + first, last - first);
  const ToneEstimate in = fit_tone(in_window, f, options.sample_rate, first);
  const ToneEstimate response = fit_tone(out_window, f, options.sample_rate, first);

  if (response.amplitude < kResponseNoiseFloor || in.amplitude < kResponseNoiseFloor)
    return {k, response.amplitude / std::max(in.amplitude, kResponseNoiseFloor), 0.0, false};
  return {k, response.amplitude / in.amplitude, wrap_phase(in.phase - response.phase), true};
}

/// Stepped-sine identification at f0, 2 f0, ..., max_k f0.
template <ResponseSystem System>
FrequencyResponse measure_frequency_response(System&& system, const ResponseOptions& options = {}) {
  if (!(options.f0 > 0.0)) throw std::invalid_argument("f0 must be positive");
  if (options.max_k < 1) throw std::invalid_argument("max_k must be >= 1");
  if (options.amplitude == 0.0) throw std::invalid_argument("drive amplitude must be non-zero");
  require_nyquist(options.f0 * options.max_k, options.sample_rate, options.max_k);

  std::vector<ResponseEntry> entries(static_cast<std::size_t>(options.max_k));
  if (options.concurrent) {
    std::vector<std::future<ResponseEntry>> jobs;
    for (int k = 1; k <= options.max_k; ++k)
      jobs.push_back(std::async(std::launch::async, [system, k, &options]() mutable {
        return measure_harmonic(system, k, options);
      }));
    for (std::size_t i = 0; i < jobs.size(); ++i) entries[i] = jobs[i].get();
  } else {
    for (int k = 1; k <= options.max_k; ++k) entries[static_cast<std::size_t>(k - 1)] = measure_harmonic(system, k, options);
  }
  return FrequencyResponse(options.f0, std::move(entries));
}

struct BodeRow {
  int k = 1;
  double f_hz = 0.0;
  double gain_db = 0.0;
  double phase_deg = 0.0;
  bool unwrapped = false;  // phase moved off its principal value
};

struct BodeTable {
  std::vector<BodeRow> rows;
  std::vector<int> excluded;  // unusable harmonics left out
};

/// Gain in dB relative to reference_gain and phase delay in degrees,
/// unwrapped so each row lies within 180 degrees of the previous one.
inline BodeTable bode_export(const FrequencyResponse& response, double reference_gain = 1.0) {
  if (!(reference_gain > 0.0)) throw std::invalid_argument("reference gain must be positive");
  BodeTable table;
  std::optional<double> previous;
  for (const auto& e : response.entries()) {
    if (!e.usable) {
      table.excluded.push_back(e.k);
      continue;
    }
    const double wrapped = e.phase_delay * 180.0 / kPi;
    double phase = wrapped;
    if (previous) phase -= 360.0 * std::round((phase - *previous) / 360.0);
    previous = phase;
    table.rows.push_back({e.k, e.k * response.f0(), 20.0 * std::log10(e.gain / reference_gain), phase,
                          phase != wrapped});
  }
  return table;
}

/// The simulator as a sweep system: pressure in Pa, inlet flow in L/s.
inline auto chamber_sweep_system(ChamberModel model) {
  return [model = std::move(model)](const Waveform& drive) {
    SimulationResult r = simulate(model, drive);
    return SweepTraces{std::move(r.pressure), std::move(r.inlet_flow)};
  };
}

/// The simulator as a response system: drive volts in, sensor volts out.
inline auto chamber_response_system(ChamberModel model) {
  return [model = std::move(model)](const Waveform& drive) {
    return simulate(model, drive, {PressureOutput::sensor_volts, 1}).pressure;
  };
}

}  // namespace infrachamber
