#pragma once

// Turbine-pulse modeling and inverse-filter pre-compensation.
//
// A target pulse x(t) = sum a_k sin(2 pi k f0 t + phi_k) is pushed through a
// system with per-harmonic gain b_k and phase delay theta_k by driving it
// with y(t) = sum (a_k / b_k) sin(2 pi k f0 t + phi_k + theta_k).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infrachamber/chamber.hpp"
#include "infrachamber/signal.hpp"

namespace infrachamber {

enum class PulseSource { measured_file, reference_synthetic };

struct PulseSpec {
  double f0 = 0.8;
  HarmonicSpectrum spectrum;
  double peak_pa = 0.0;
  PulseSource source = PulseSource::reference_synthetic;
};

// Shape of the synthetic dipole, as fractions of one period: two raised
// cosine lobes of this half-width, centred this far either side of the
// mid-period zero crossing. Chosen so harmonics 2 and 3 carry the most
// energy, k = 1 is smaller than both, and the tail above k = 12 is
// negligible.
inline constexpr double kPulseLobeOffset = 0.08;
inline constexpr double kPulseLobeHalfWidth = 0.10;
inline constexpr int kPulseTemplateSamples = 4096;

/// One period of the dipole template at phase u in [0, 1): positive lobe
/// before mid-period, negative lobe after.
inline double dipole_template(double u) {
  auto lobe = [](double x) {
    return std::abs(x) < kPulseLobeHalfWidth ? 0.5 * (1.0 + std::cos(kPi * x / kPulseLobeHalfWidth)) : 0.0;
  };
  const double centred = u - 0.5;
  return lobe(centred + kPulseLobeOffset) - lobe(centred - kPulseLobeOffset);
}

/// Largest |x| of the spectrum's waveform over one period, evaluated on a
/// dense grid.
inline double spectrum_peak(const HarmonicSpectrum& spectrum, int grid = kPulseTemplateSamples) {
  const Waveform period = synthesize_harmonics(spectrum, 1.0 / spectrum.f0(), spectrum.f0() * grid);
  double peak = 0.0;
  for (double x : period.samples()) peak = std::max(peak, std::abs(x));
  return peak;
}

inline HarmonicSpectrum scale_spectrum(const HarmonicSpectrum& spectrum, double factor) {
  std::vector<Harmonic> out(spectrum.components());
  for (auto& c : out) c.magnitude *= factor;
  return HarmonicSpectrum(spectrum.f0(), std::move(out));
}

/// Canonical synthetic turbine pulse: rise to +peak, sharp fall through zero
/// to -peak, return to zero; truncated to n_harmonics and scaled so its
/// synthesized peak is peak_pa.
inline PulseSpec reference_turbine_pulse(double f0 = 0.8, double peak_pa = 0.15, int n_harmonics = 12) {
  if (n_harmonics < 3) throw std::invalid_argument("reference pulse needs at least three harmonics");
  if (!(f0 > 0.0)) throw std::invalid_argument("pulse f0 must be positive");
  if (!(peak_pa > 0.0)) throw std::invalid_argument("pulse peak must be positive");

  std::vector<double> period(kPulseTemplateSamples);
  for (int n = 0; n < kPulseTemplateSamples; ++n)
    period[static_cast<std::size_t>(n)] = dipole_template(static_cast<double>(n) / kPulseTemplateSamples);
  const Waveform shape(std::move(period), f0 * kPulseTemplateSamples, Unit::pascals);

  const HarmonicSpectrum raw = analyze_harmonics(shape, f0, n_harmonics);
  const HarmonicSpectrum spectrum = scale_spectrum(raw, peak_pa / spectrum_peak(raw));
  return {f0, spectrum, peak_pa, PulseSource::reference_synthetic};
}

/// Pulse from a recorded pressure waveform holding whole periods of f0.
inline PulseSpec pulse_from_waveform(const Waveform& wave, double f0, int n_harmonics) {
  if (wave.unit() != Unit::pascals) throw std::invalid_argument("pulse waveform must be in pascals");
  const HarmonicAnalysis analysis = decompose_harmonics(wave, f0, n_harmonics);
  double peak = 0.0;
  for (double x : wave.samples()) peak = std::max(peak, std::abs(x - analysis.dc));
  return {f0, analysis.spectrum, peak, PulseSource::measured_file};
}

/// a_k / b_k with the phase advanced by theta_k.
inline HarmonicSpectrum precompensate(const PulseSpec& pulse, const FrequencyResponse& response) {
  const HarmonicSpectrum& target = pulse.spectrum;
  if (std::abs(response.f0() - target.f0()) > 1e-9 * target.f0())
    throw std::invalid_argument("response f0 " + std::to_string(response.f0()) + " Hz does not match pulse f0 " +
                                std::to_string(target.f0()) + " Hz");
  std::vector<Harmonic> out;
  out.reserve(target.components().size());
  for (const auto& c : target.components()) {
    const ResponseEntry* e = response.find(c.k);
    if (e == nullptr) throw std::invalid_argument("response has no entry for harmonic k=" + std::to_string(c.k));
    if (!e->usable || !(e->gain > 0.0))
      throw std::invalid_argument("system cannot pass harmonic k=" + std::to_string(c.k) + " (zero or unusable gain)");
    out.push_back({c.k, c.magnitude / e->gain, wrap_phase(c.phase + e->phase_delay)});
  }
  return HarmonicSpectrum(target.f0(), std::move(out));
}

/// What a linear system with this response does to a periodic input.
inline HarmonicSpectrum apply_response(const HarmonicSpectrum& input, const FrequencyResponse& response) {
  std::vector<Harmonic> out;
  out.reserve(input.components().size());
  for (const auto& c : input.components()) {
    const ResponseEntry* e = response.find(c.k);
    if (e == nullptr || !e->usable)
      throw std::invalid_argument("response has no usable entry for harmonic k=" + std::to_string(c.k));
    out.push_back({c.k, c.magnitude * e->gain, wrap_phase(c.phase - e->phase_delay)});
  }
  return HarmonicSpectrum(input.f0(), std::move(out));
}

class DriveRangeError : public std::invalid_argument {
 public:
  DriveRangeError(std::size_t index, double volts)
      : std::invalid_argument("drive leaves the valve range at sample " + std::to_string(index) + " (" +
                              std::to_string(volts) + " V); reduce the drive scale"),
        index_(index),
        volts_(volts) {}
  std::size_t index() const { return index_; }
  double volts() const { return volts_; }

 private:
  std::size_t index_;
  double volts_;
};

struct DriveOptions {
  int n_periods = 20;
  double offset = 1.0;
  double drive_scale = 0.02;  // modulator volts per pascal
  double sample_rate = kDefaultSampleRate;
  int taper_cycles = 2;
};

/// Periodic modulator drive: offset + drive_scale * y(t), tapered at f0.
inline Waveform generate_drive(const HarmonicSpectrum& compensated, const DriveOptions& options = {}) {
  if (options.n_periods <= 2 * options.taper_cycles)
    throw std::invalid_argument("drive needs more periods than its two tapers");
  const double f0 = compensated.f0();
  Waveform y = synthesize_harmonics(compensated, options.n_periods / f0, options.sample_rate, 0.0);
  std::vector<double> v(y.samples());
  for (double& x : v) x *= options.drive_scale;
  Waveform tapered = taper_cosine(Waveform(std::move(v), options.sample_rate, Unit::volts), f0,
                                  options.taper_cycles, 0.0);
  std::vector<double> drive(tapered.samples());
  std::size_t worst = drive.size();
  double worst_excess = 0.0;
  for (std::size_t n = 0; n < drive.size(); ++n) {
    drive[n] += options.offset;
    const double excess = std::max(drive[n] - kValveClosedVolts, kValveOpenVolts - drive[n]);
    if (excess > worst_excess) {
      worst_excess = excess;
      worst = n;
    }
  }
  if (worst < drive.size()) throw DriveRangeError(worst, drive[worst]);
  return Waveform(std::move(drive), options.sample_rate, Unit::volts);
}

inline constexpr double kSetbackLowDb = 60.0;
inline constexpr double kSetbackHighDb = 80.0;

enum class LevelClass { below_setback, within_setback, above_setback };

inline LevelClass classify_level(double peak_db) {
  if (peak_db > kSetbackHighDb) return LevelClass::above_setback;
  if (peak_db < kSetbackLowDb) return LevelClass::below_setback;
  return LevelClass::within_setback;
}

struct ReproductionReport {
  double rms_rel_err = 0.0;
  double peak_rel_err = 0.0;
  double peak_pa = 0.0;
  double peak_db = 0.0;
  int periods_compared = 0;
  bool within_setback_range = false;
  LevelClass level = LevelClass::below_setback;
  std::vector<double> period_rms_rel_err;
};

struct Reproduction {
  ReproductionReport report;
  HarmonicSpectrum driven_spectrum;  // compensated, or the raw target
  Waveform drive;                    // volts
  Waveform target;                   // retained periods, target units
  Waveform achieved;                 // retained periods, rescaled by 1/drive_scale
};

struct RoundtripOptions {
  DriveOptions drive;
  int skip_head_periods = 4;
  int skip_tail_periods = 2;
  bool compensate = true;
};

/// Drives the model with the (pre-compensated) pulse and compares the
/// steady periods of the chamber response against the target.
inline Reproduction reproduce_pulse(const PulseSpec& pulse, const ChamberModel& model,
                                    const FrequencyResponse& response, const RoundtripOptions& options = {}) {
  const DriveOptions& d = options.drive;
  if (!(d.drive_scale > 0.0)) throw std::invalid_argument("drive scale must be positive");
  if (options.skip_head_periods + options.skip_tail_periods >= d.n_periods)
    throw std::invalid_argument("no periods left to compare after stripping transients");

  HarmonicSpectrum driven = options.compensate ? precompensate(pulse, response) : pulse.spectrum;
  Waveform drive = generate_drive(driven, d);
  const SimulationResult sim = simulate(model, drive, {PressureOutput::sensor_volts, 1});

  const double rate = d.sample_rate;
  const double period_samples = rate / pulse.f0;
  const auto first = static_cast<std::size_t>(std::llround(options.skip_head_periods * period_samples));
  const auto last = static_cast<std::size_t>(std::llround((d.n_periods - options.skip_tail_periods) * period_samples));
  const int periods = d.n_periods - options.skip_head_periods - options.skip_tail_periods;

  const Waveform full_target = synthesize_harmonics(pulse.spectrum, d.n_periods / pulse.f0, rate, 0.0, Unit::pascals);
  Waveform target = full_target.slice(first, last);
  Waveform sensor = sim.pressure.slice(first, last);

  const double mean = sensor.mean();
  std::vector<double> achieved(sensor.size());
  double peak_sensor = 0.0;
  for (std::size_t n = 0; n < achieved.size(); ++n) {
    const double dev = sensor[n] - mean;
    peak_sensor = std::max(peak_sensor, std::abs(dev));
    achieved[n] = dev / d.drive_scale;
  }

  auto rms_ratio = [&](std::size_t a, std::size_t b) {
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t n = a; n < b; ++n) {
      const double e = achieved[n] - target[n];
      err += e * e;
      ref += target[n] * target[n];
    }
    return std::sqrt(err / ref);
  };

  ReproductionReport report;
  report.rms_rel_err = rms_ratio(0, achieved.size());
  for (int p = 0; p < periods; ++p) {
    const auto a = static_cast<std::size_t>(std::llround(p * period_samples));
    const auto b = std::min(achieved.size(), static_cast<std::size_t>(std::llround((p + 1) * period_samples)));
    report.period_rms_rel_err.push_back(rms_ratio(a, b));
  }
  double target_peak = 0.0;
  double achieved_peak = 0.0;
  for (std::size_t n = 0; n < achieved.size(); ++n) {
    target_peak = std::max(target_peak, std::abs(target[n]));
    achieved_peak = std::max(achieved_peak, std::abs(achieved[n]));
  }
  report.peak_rel_err = std::abs(achieved_peak - target_peak) / target_peak;
  report.peak_pa = peak_sensor * model.baratron_pa_per_volt;
  report.peak_db = report.peak_pa > 0.0 ? pa_to_db(report.peak_pa) : -std::numeric_limits<double>::infinity();
  report.periods_compared = periods;
  report.level = classify_level(report.peak_db);
  report.within_setback_range = report.level == LevelClass::within_setback;

  return {std::move(report), std::move(driven), std::move(drive), std::move(target),
          Waveform(std::move(achieved), rate, Unit::pascals)};
}

inline ReproductionReport verify_roundtrip(const PulseSpec& pulse, const ChamberModel& model,
                                           const FrequencyResponse& response, double drive_scale,
                                           RoundtripOptions options = {}) {
  options.drive.drive_scale = drive_scale;
  return reproduce_pulse(pulse, model, response, options).report;
}

}  // namespace infrachamber
