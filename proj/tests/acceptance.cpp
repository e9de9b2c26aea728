// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "infrachamber/infrachamber.hpp"

using namespace infrachamber;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [out of tolerance]");
}

std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

Outcome decibels() {
  Outcome o;
  const double a = pa_to_db(0.15);
  const double b = pa_to_db(1.0);
  const double c = pa_to_db(8.75);
  note(o, std::abs(a - 77.5) <= 0.05, "0.15 Pa = " + fmt(a) + " dB");
  note(o, std::abs(b - 94.0) <= 0.1, "1 Pa = " + fmt(b) + " dB");
  note(o, std::abs(c - 112.8) <= 0.5, "8.75 Pa = " + fmt(c) + " dB");
  return o;
}

Outcome pitot() {
  Outcome o;
  const double u = pitot_speed(50.0);
  note(o, std::abs(u - 9.035) <= 0.005, "u(50 Pa) = " + fmt(u) + " m/s");
  const double back = load_pressure(m3s_to_lps(u * 0.01), 0.01);
  note(o, std::abs(back - 50.0) <= 1e-12 * 50.0, "load_pressure(u) = " + fmt(back, 15) + " Pa");
  // Hand calculation: 9.035 m/s * pi * (0.0381 m)^2 * 1000 L/m^3.
  const double q = flow_from_speed(9.035, 0.0762);
  note(o, std::abs(q - 41.2029186628130) <= 1e-9, "q(9.035 m/s, 3 in) = " + fmt(q, 12) + " L/s");
  return o;
}

Outcome static_sweep_endpoints() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  SweepOptions options;
  options.hold_seconds = 5.0;
  const SweepRecord r = static_sweep(chamber_sweep_system(default_chamber_model()), options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.steps.size() != 21 || r.error) {
    note(o, false, "sweep did not complete");
    return o;
  }
  const auto& lo = r.steps.front();
  const auto& hi = r.steps.back();
  note(o, lo.steady_pressure_pa <= 0.1 * 175.0, "p(-5 V) = " + fmt(lo.steady_pressure_pa) + " Pa");
  note(o, std::abs(hi.steady_pressure_pa - 175.0) <= 0.1 * 175.0, "p(+5 V) = " + fmt(hi.steady_pressure_pa) + " Pa");
  note(o, std::abs(lo.steady_flow_lps - 27.5) <= 0.1 * 27.5, "q(-5 V) = " + fmt(lo.steady_flow_lps) + " L/s");
  note(o, std::abs(hi.steady_flow_lps - 7.5) <= 0.1 * 7.5, "q(+5 V) = " + fmt(hi.steady_flow_lps) + " L/s");
  const double per_five = seconds / (21.0 * options.hold_seconds / 5.0);
  note(o, per_five < 1.0, "5 s simulated in " + fmt(per_five, 3) + " s");
  return o;
}

Outcome tones() {
  Outcome o;
  const ChamberModel model = default_chamber_model();
  const ExperimentConfig config;
  const double slow = measure_tone(model, 0.8, config).amplitude_pa;
  const double fast = measure_tone(model, 8.0, config).amplitude_pa;
  note(o, std::abs(slow - 12.5) <= 0.2 * 12.5, "0.8 Hz: " + fmt(slow) + " Pa");
  note(o, std::abs(fast - 5.0) <= 0.2 * 5.0, "8 Hz: " + fmt(fast) + " Pa");
  note(o, std::abs(slow / fast - 2.5) <= 0.25 * 2.5, "ratio " + fmt(slow / fast));
  return o;
}

// y = one_pole(fir(x)): FIR taps h (h[0] = 1), then y[n] = a y[n-1] + (1 - a) v[n],
// both started in steady state at the first input sample.
struct LtiSystem {
  std::vector<double> taps;
  double pole = 0.0;

  Waveform operator()(const Waveform& x) const {
    const std::size_t n_samples = x.size();
    std::vector<double> y(n_samples);
    double state = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      double v = 0.0;
      for (std::size_t m = 0; m < taps.size(); ++m) v += taps[m] * x[n >= m ? n - m : 0];
      if (n == 0) {
        double gain0 = 0.0;
        for (double h : taps) gain0 += h;
        state = gain0 * x[0];
      }
      state = pole * state + (1.0 - pole) * v;
      y[n] = state;
    }
    return x.with_samples(std::move(y));
  }

  std::complex<double> transfer(double omega) const {
    std::complex<double> h = 0.0;
    for (std::size_t m = 0; m < taps.size(); ++m) h += taps[m] * std::polar(1.0, -omega * static_cast<double>(m));
    return h * (1.0 - pole) / (1.0 - pole * std::polar(1.0, -omega));
  }
};

Outcome estimator_exactness() {
  Outcome o;
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> tap(-0.4, 0.4);
  std::uniform_real_distribution<double> pole(0.0, 0.8);
  double worst_gain = 0.0;
  double worst_phase = 0.0;
  const int trials = 12;
  for (int t = 0; t < trials; ++t) {
    LtiSystem sys;
    sys.taps.push_back(1.0);
    const int extra = static_cast<int>(rng() % 6);
    for (int i = 0; i < extra; ++i) sys.taps.push_back(tap(rng));
    sys.pole = pole(rng);
    const FrequencyResponse r = measure_frequency_response(sys);
    for (const auto& e : r.entries()) {
      const std::complex<double> h = sys.transfer(kTwoPi * e.k * 0.8 / 1000.0);
      worst_gain = std::max(worst_gain, std::abs(e.gain - std::abs(h)) / std::abs(h));
      worst_phase = std::max(worst_phase, std::abs(wrap_phase(e.phase_delay + std::arg(h))));
    }
  }
  note(o, worst_gain <= 1e-6, "max gain rel err " + fmt(worst_gain, 3));
  note(o, worst_phase <= 1e-6, "max phase err " + fmt(worst_phase, 3) + " rad");
  o.detail += " (" + std::to_string(trials) + " systems, k = 1..25)";
  return o;
}

Outcome inverse_property() {
  Outcome o;
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> mag(0.0, 1.0);
  std::uniform_real_distribution<double> gain(0.05, 2.0);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Harmonic> comps;
    std::vector<ResponseEntry> entries;
    for (int k = 1; k <= 25; ++k) {
      comps.push_back({k, mag(rng), phase(rng)});
      entries.push_back({k, gain(rng), phase(rng), true});
    }
    const PulseSpec pulse{0.8, HarmonicSpectrum(0.8, comps), 1.0};
    const FrequencyResponse response(0.8, entries);
    const HarmonicSpectrum back = apply_response(precompensate(pulse, response), response);
    for (const auto& c : back.components()) {
      const Harmonic& want = *pulse.spectrum.find(c.k);
      worst = std::max(worst, std::abs(c.magnitude - want.magnitude));
      worst = std::max(worst, std::abs(wrap_phase(c.phase - want.phase)));
    }
  }
  note(o, worst <= 1e-9, "100 trials, max componentwise err " + fmt(worst, 3));
  return o;
}

Outcome closed_loop() {
  Outcome o;
  const ChamberModel model = default_chamber_model();
  const FrequencyResponse response = measure_frequency_response(chamber_response_system(model));
  const PulseSpec pulse = reference_turbine_pulse();
  const double scale = 1.0 / model.baratron_pa_per_volt;
  RoundtripOptions options;
  const ReproductionReport with = verify_roundtrip(pulse, model, response, scale, options);
  options.compensate = false;
  const ReproductionReport without = verify_roundtrip(pulse, model, response, scale, options);
  note(o, with.rms_rel_err <= 0.05, "compensated rms err " + fmt(with.rms_rel_err, 4));
  note(o, without.rms_rel_err > with.rms_rel_err, "uncompensated rms err " + fmt(without.rms_rel_err, 4));
  o.detail += " over " + std::to_string(with.periods_compared) + " periods, peak " + fmt(with.peak_db, 4) + " dB";
  return o;
}

Outcome round_trip_properties() {
  Outcome o;
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> mag(0.0, 2.0);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  double worst_rt = 0.0;
  double worst_parseval = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Harmonic> comps;
    for (int k = 1; k <= 25; ++k) comps.push_back({k, mag(rng), phase(rng)});
    const HarmonicSpectrum s(0.8, comps);
    const Waveform w = synthesize_harmonics(s, 2.5, 1000.0, 1.0);
    const HarmonicSpectrum back = analyze_harmonics(w, 0.8, 25);
    double expected = 0.0;
    for (const auto& c : back.components()) {
      const Harmonic& want = *s.find(c.k);
      worst_rt = std::max(worst_rt, std::abs(c.magnitude - want.magnitude));
      worst_rt = std::max(worst_rt, std::abs(wrap_phase(c.phase - want.phase)));
      expected += want.magnitude * want.magnitude / 2.0;
    }
    const double mean = w.mean();
    double ms = 0.0;
    for (double x : w.samples()) ms += (x - mean) * (x - mean);
    ms /= static_cast<double>(w.size());
    worst_parseval = std::max(worst_parseval, std::abs(ms - expected) / expected);
  }
  double worst_db = 0.0;
  std::uniform_real_distribution<double> exponent(-6.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = std::pow(10.0, exponent(rng));
    worst_db = std::max(worst_db, std::abs(pa_to_db(10.0 * p) - pa_to_db(p) - 20.0));
  }
  note(o, worst_rt <= 1e-9, "round trip max err " + fmt(worst_rt, 3));
  note(o, worst_parseval <= 1e-9, "Parseval max rel err " + fmt(worst_parseval, 3));
  note(o, worst_db <= 1e-12, "20 dB/decade max err " + fmt(worst_db, 3));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dB conversion", decibels},
      {"Pitot/Bernoulli consistency", pitot},
      {"static sweep endpoints", static_sweep_endpoints},
      {"tone amplitudes and roll-off", tones},
      {"frequency-response estimator exactness", estimator_exactness},
      {"compensation inverse property", inverse_property},
      {"closed-loop pulse replication", closed_loop},
      {"round trip, Parseval and dB properties", round_trip_properties},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu %s: %s (%s) [%.2f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), seconds);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
