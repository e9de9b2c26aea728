#pragma once

// Waveform and harmonic-spectrum primitives shared by the chamber model,
// the identification routines and the compensation pipeline.
//
// Phase convention throughout: a component (k, a, phi) contributes
// a * sin(2*pi*f0*k*t + phi), with t = n / sample_rate and phi wrapped to
// (-pi, pi].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace infrachamber {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kDefaultSampleRate = 1000.0;
inline constexpr double kReferencePressurePa = 20e-6;

enum class Unit { volts, pascals, liters_per_second, dimensionless };

inline std::string_view unit_name(Unit unit) {
  switch (unit) {
    case Unit::volts: return "volts";
    case Unit::pascals: return "pascals";
    case Unit::liters_per_second: return "liters_per_second";
    case Unit::dimensionless: return "dimensionless";
  }
  return "dimensionless";
}

inline Unit parse_unit(std::string_view name) {
  if (name == "volts") return Unit::volts;
  if (name == "pascals") return Unit::pascals;
  if (name == "liters_per_second") return Unit::liters_per_second;
  if (name == "dimensionless") return Unit::dimensionless;
  throw std::invalid_argument("unknown unit '" + std::string(name) + "'");
}

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double phase) {
  double r = std::remainder(phase, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

/// Uniformly sampled real signal tagged with its physical unit.
class Waveform {
 public:
  Waveform(std::vector<double> samples, double sample_rate, Unit unit)
      : samples_(std::move(samples)), sample_rate_(sample_rate), unit_(unit) {
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
      throw std::invalid_argument("waveform sample rate must be positive");
  }

  const std::vector<double>& samples() const { return samples_; }
  double sample_rate() const { return sample_rate_; }
  Unit unit() const { return unit_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double operator[](std::size_t n) const { return samples_[n]; }

  double duration() const { return static_cast<double>(samples_.size()) / sample_rate_; }
  double time_at(std::size_t n) const { return static_cast<double>(n) / sample_rate_; }

  double mean() const {
    if (samples_.empty()) throw std::invalid_argument("mean of an empty waveform");
    return std::accumulate(samples_.begin(), samples_.end(), 0.0) /
           static_cast<double>(samples_.size());
  }

  /// Same rate, new samples and (optionally) a new unit.
  Waveform with_samples(std::vector<double> samples) const {
    return Waveform(std::move(samples), sample_rate_, unit_);
  }
  Waveform with_samples(std::vector<double> samples, Unit unit) const {
    return Waveform(std::move(samples), sample_rate_, unit);
  }

  /// Samples [first, last) as a new waveform. Time origin is reset to zero.
  Waveform slice(std::size_t first, std::size_t last) const {
    if (first > last || last > samples_.size())
      throw std::out_of_range("waveform slice out of range");
    return Waveform(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(first),
                                        samples_.begin() + static_cast<std::ptrdiff_t>(last)),
                    sample_rate_, unit_);
  }

  friend bool operator==(const Waveform&, const Waveform&) = default;

 private:
  std::vector<double> samples_;
  double sample_rate_;
  Unit unit_;
};

struct Harmonic {
  int k = 1;
  double magnitude = 0.0;
  double phase = 0.0;  // radians, (-pi, pi]
  friend bool operator==(const Harmonic&, const Harmonic&) = default;
};

namespace detail {
template <class Entry>
void check_harmonic_order(const std::vector<Entry>& entries, const char* what) {
  int previous = 0;
  for (const auto& e : entries) {
    if (e.k < 1) throw std::invalid_argument(std::string(what) + ": harmonic index must be >= 1");
    if (e.k <= previous)
      throw std::invalid_argument(std::string(what) + ": harmonic indices must be strictly increasing (k=" +
                                  std::to_string(e.k) + ")");
    previous = e.k;
  }
}
}  // namespace detail

/// Fundamental frequency plus per-harmonic magnitude and phase.
class HarmonicSpectrum {
 public:
  HarmonicSpectrum(double f0, std::vector<Harmonic> components) : f0_(f0), components_(std::move(components)) {
    if (!(f0_ > 0.0) || !std::isfinite(f0_)) throw std::invalid_argument("spectrum f0 must be positive");
    detail::check_harmonic_order(components_, "spectrum");
    for (auto& c : components_) {
      if (!(c.magnitude >= 0.0) || !std::isfinite(c.magnitude))
        throw std::invalid_argument("spectrum magnitude must be non-negative (k=" + std::to_string(c.k) + ")");
      c.phase = wrap_phase(c.phase);
    }
  }

  double f0() const { return f0_; }
  const std::vector<Harmonic>& components() const { return components_; }
  int max_k() const { return components_.empty() ? 0 : components_.back().k; }

  const Harmonic* find(int k) const {
    auto it = std::lower_bound(components_.begin(), components_.end(), k,
                               [](const Harmonic& h, int key) { return h.k < key; });
    return (it != components_.end() && it->k == k) ? &*it : nullptr;
  }

  double magnitude(int k) const {
    const Harmonic* h = find(k);
    return h ? h->magnitude : 0.0;
  }

  friend bool operator==(const HarmonicSpectrum&, const HarmonicSpectrum&) = default;

 private:
  double f0_;
  std::vector<Harmonic> components_;
};

struct ResponseEntry {
  int k = 1;
  double gain = 1.0;         // output / input, dimensionless
  double phase_delay = 0.0;  // radians, positive when the output lags
  bool usable = true;
  friend bool operator==(const ResponseEntry&, const ResponseEntry&) = default;
};

/// Per-harmonic gain and phase delay of a system at k * f0.
class FrequencyResponse {
 public:
  FrequencyResponse(double f0, std::vector<ResponseEntry> entries) : f0_(f0), entries_(std::move(entries)) {
    if (!(f0_ > 0.0) || !std::isfinite(f0_)) throw std::invalid_argument("response f0 must be positive");
    detail::check_harmonic_order(entries_, "response");
    for (auto& e : entries_) {
      if (e.usable && !(e.gain > 0.0))
        throw std::invalid_argument("response gain must be positive (k=" + std::to_string(e.k) + ")");
      e.phase_delay = wrap_phase(e.phase_delay);
    }
  }

  double f0() const { return f0_; }
  const std::vector<ResponseEntry>& entries() const { return entries_; }

  const ResponseEntry* find(int k) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                               [](const ResponseEntry& e, int key) { return e.k < key; });
    return (it != entries_.end() && it->k == k) ? &*it : nullptr;
  }

  friend bool operator==(const FrequencyResponse&, const FrequencyResponse&) = default;

 private:
  double f0_;
  std::vector<ResponseEntry> entries_;
};

inline void require_nyquist(double frequency, double sample_rate, int k) {
  if (!(sample_rate > 2.0 * frequency))
    throw std::invalid_argument("harmonic k=" + std::to_string(k) + " at " + std::to_string(frequency) +
                                " Hz is at or above the Nyquist limit of " + std::to_string(sample_rate / 2.0) +
                                " Hz");
}

/// offset + sum_k a_k sin(2 pi f0 k t + phi_k), sampled for `duration` seconds.
inline Waveform synthesize_harmonics(const HarmonicSpectrum& spectrum, double duration, double sample_rate,
                                     double offset = 0.0, Unit unit = Unit::dimensionless) {
  if (!(duration > 0.0)) throw std::invalid_argument("synthesis duration must be positive");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  for (const auto& c : spectrum.components()) require_nyquist(spectrum.f0() * c.k, sample_rate, c.k);

  const auto n_samples = static_cast<std::size_t>(std::llround(duration * sample_rate));
  if (n_samples == 0) throw std::invalid_argument("synthesis duration shorter than one sample");
  std::vector<double> x(n_samples, offset);
  for (const auto& c : spectrum.components()) {
    if (c.magnitude == 0.0) continue;
    const double cycles_per_sample = spectrum.f0() * c.k / sample_rate;
    for (std::size_t n = 0; n < n_samples; ++n) {
      // Reduce the cycle count before scaling by 2*pi to keep the argument small.
      const double cycles = cycles_per_sample * static_cast<double>(n);
      x[n] += c.magnitude * std::sin(kTwoPi * (cycles - std::floor(cycles)) + c.phase);
    }
  }
  return Waveform(std::move(x), sample_rate, unit);
}

struct ToneEstimate {
  double amplitude = 0.0;
  double phase = 0.0;  // sine-phase, (-pi, pi]
  double dc = 0.0;
};

/// Single-bin correlation of x[n] against sin/cos at the given frequency.
/// Exact when the samples hold an integer number of periods. `first_index`
/// sets the absolute sample index of x[0] so phases refer to t = 0.
inline ToneEstimate correlate_tone(std::span<const double> x, double frequency, double sample_rate,
                                   std::size_t first_index = 0) {
  if (x.empty()) throw std::invalid_argument("cannot correlate an empty signal");
  const double cycles_per_sample = frequency / sample_rate;
  double s = 0.0;
  double c = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double cycles = cycles_per_sample * static_cast<double>(n + first_index);
    const double arg = kTwoPi * (cycles - std::floor(cycles));
    s += x[n] * std::sin(arg);
    c += x[n] * std::cos(arg);
  }
  const double scale = 2.0 / static_cast<double>(x.size());
  s *= scale;
  c *= scale;
  // a sin(w t + phi) = a cos(phi) sin(w t) + a sin(phi) cos(w t)
  return {std::hypot(s, c), wrap_phase(std::atan2(c, s)), 0.0};
}

/// Least-squares fit of dc + A sin(w t) + B cos(w t) over x. Exact for a pure
/// tone on any window length, integer period count or not.
inline ToneEstimate fit_tone(std::span<const double> x, double frequency, double sample_rate,
                             std::size_t first_index = 0) {
  if (x.size() < 3) throw std::invalid_argument("tone fit needs at least three samples");
  const double cycles_per_sample = frequency / sample_rate;
  // Normal equations for basis (sin, cos, 1).
  double ss = 0, sc = 0, s1 = 0, cc = 0, c1 = 0, n1 = 0;
  double xs = 0, xc = 0, x1 = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double cycles = cycles_per_sample * static_cast<double>(n + first_index);
    const double arg = kTwoPi * (cycles - std::floor(cycles));
    const double sn = std::sin(arg);
    const double cs = std::cos(arg);
    ss += sn * sn;
    sc += sn * cs;
    s1 += sn;
    cc += cs * cs;
    c1 += cs;
    n1 += 1.0;
    xs += x[n] * sn;
    xc += x[n] * cs;
    x1 += x[n];
  }
  double m[3][4] = {{ss, sc, s1, xs}, {sc, cc, c1, xc}, {s1, c1, n1, x1}};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-300) throw std::invalid_argument("tone fit is singular");
    std::swap(m[col], m[pivot]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double factor = m[r][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[r][j] -= factor * m[col][j];
    }
  }
  const double a = m[0][3] / m[0][0];
  const double b = m[1][3] / m[1][1];
  const double dc = m[2][3] / m[2][2];
  return {std::hypot(a, b), wrap_phase(std::atan2(b, a)), dc};
}

struct HarmonicAnalysis {
  HarmonicSpectrum spectrum;
  double dc = 0.0;  // mean removed before projection
};

/// Projects the mean-removed waveform onto harmonics 1..max_k of f0.
inline HarmonicAnalysis decompose_harmonics(const Waveform& wave, double f0, int max_k) {
  if (wave.empty()) throw std::invalid_argument("cannot analyze an empty waveform");
  if (!(f0 > 0.0)) throw std::invalid_argument("f0 must be positive");
  if (max_k < 1) throw std::invalid_argument("max_k must be >= 1");
  const double rate = wave.sample_rate();
  require_nyquist(f0 * max_k, rate, max_k);

  const double samples_per_period = rate / f0;
  const double periods = static_cast<double>(wave.size()) / samples_per_period;
  const double whole = std::round(periods);
  if (whole < 1.0 || std::abs(static_cast<double>(wave.size()) - whole * samples_per_period) > 1.0)
    throw std::invalid_argument("waveform holds " + std::to_string(periods) + " periods of " + std::to_string(f0) +
                                " Hz; an integer number of periods is required");

  const double dc = wave.mean();
  std::vector<double> centered(wave.samples());
  for (double& v : centered) v -= dc;

  std::vector<Harmonic> components;
  components.reserve(static_cast<std::size_t>(max_k));
  for (int k = 1; k <= max_k; ++k) {
    const ToneEstimate t = correlate_tone(centered, f0 * k, rate);
    components.push_back({k, t.amplitude, t.phase});
  }
  return {HarmonicSpectrum(f0, std::move(components)), dc};
}

inline HarmonicSpectrum analyze_harmonics(const Waveform& wave, double f0, int max_k) {
  return decompose_harmonics(wave, f0, max_k).spectrum;
}

/// Raised-cosine fade-in/out over the first and last `taper_cycles` periods
/// of f, applied about `level` (the waveform mean when not given).
inline Waveform taper_cosine(const Waveform& wave, double frequency, int taper_cycles,
                             std::optional<double> level = std::nullopt) {
  if (taper_cycles < 0) throw std::invalid_argument("taper cycles must be non-negative");
  if (taper_cycles == 0) return wave;
  if (!(frequency > 0.0)) throw std::invalid_argument("taper frequency must be positive");
  if (wave.empty()) throw std::invalid_argument("cannot taper an empty waveform");

  const double taper_seconds = taper_cycles / frequency;
  if (2.0 * taper_seconds > wave.duration() + 0.5 / wave.sample_rate())
    throw std::invalid_argument("taper of " + std::to_string(taper_seconds) +
                                " s at each end is longer than half the waveform");

  const double about = level.value_or(wave.mean());
  const double rate = wave.sample_rate();
  const std::size_t n_total = wave.size();
  std::vector<double> out(wave.samples());
  auto ramp = [&](double t) { return 0.5 * (1.0 - std::cos(kPi * t / taper_seconds)); };
  for (std::size_t n = 0; n < n_total; ++n) {
    const double from_start = static_cast<double>(n) / rate;
    const double from_end = static_cast<double>(n_total - 1 - n) / rate;
    double w = 1.0;
    if (from_start < taper_seconds) w = std::min(w, ramp(from_start));
    if (from_end < taper_seconds) w = std::min(w, ramp(from_end));
    if (w != 1.0) out[n] = about + w * (out[n] - about);
  }
  return wave.with_samples(std::move(out));
}

/// Tapered sine burst used for stepped-sine identification.
inline Waveform stepped_sine(double frequency, int cycles, double amplitude, double offset,
                             double sample_rate = kDefaultSampleRate, int taper_cycles = 2) {
  if (!(frequency > 0.0)) throw std::invalid_argument("test frequency must be positive");
  if (cycles <= 2 * taper_cycles)
    throw std::invalid_argument("burst of " + std::to_string(cycles) + " cycles cannot hold a " +
                                std::to_string(taper_cycles) + "-cycle taper at each end");
  require_nyquist(frequency, sample_rate, 1);
  HarmonicSpectrum tone(frequency, {{1, std::abs(amplitude), amplitude < 0 ? kPi : 0.0}});
  Waveform burst = synthesize_harmonics(tone, cycles / frequency, sample_rate, offset, Unit::volts);
  return taper_cosine(burst, frequency, taper_cycles, offset);
}

/// Sound pressure level re 20 uPa.
inline double pa_to_db(double pressure_pa) {
  if (!(pressure_pa > 0.0)) throw std::invalid_argument("pressure must be positive to express in dB");
  return 20.0 * std::log10(pressure_pa / kReferencePressurePa);
}

inline double db_to_pa(double level_db) { return kReferencePressurePa * std::pow(10.0, level_db / 20.0); }

}  // namespace infrachamber
