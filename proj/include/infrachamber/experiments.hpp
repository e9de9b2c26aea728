#pragma once

// File-based experiments behind the command-line tool. Each command loads
// its configuration before touching the output directory, so a bad config
// leaves nothing behind.

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "infrachamber/chamber.hpp"
#include "infrachamber/compensation.hpp"
#include "infrachamber/io.hpp"
#include "infrachamber/signal.hpp"
#include "infrachamber/svg.hpp"
#include "infrachamber/sysid.hpp"

namespace infrachamber {

enum ExitCode : int { kExitOk = 0, kExitVerificationFailed = 1, kExitConfigError = 2 };

struct ExperimentConfig {
  std::optional<fs::path> chamber_path;  // default chamber when unset
  fs::path out_dir = "out";
  double sample_rate = kDefaultSampleRate;
  double f0 = 0.8;
  int max_k = 25;
  double amplitude = 0.5;
  double offset = 1.0;

  double sweep_step = 0.5;
  double hold_seconds = 10.0;

  double tone_hz = 0.8;
  bool bode_reference_first = false;

  std::optional<fs::path> pulse_path;  // reference pulse when unset
  int n_harmonics = 12;
  bool compensate = true;
  std::optional<double> drive_scale;  // 1 / sensor sensitivity when unset
  double rms_tolerance = 0.05;
};

inline ChamberModel load_model(const ExperimentConfig& config) {
  if (!config.chamber_path) return default_chamber_model();
  if (!fs::exists(*config.chamber_path)) throw FormatError("chamber config not found: " + config.chamber_path->string());
  return load_chamber_config(*config.chamber_path);
}

inline void check_common(const ExperimentConfig& config) {
  if (!(config.sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(config.f0 > 0.0)) throw std::invalid_argument("f0 must be positive");
  if (config.max_k < 1) throw std::invalid_argument("max_k must be >= 1");
  if (fs::exists(config.out_dir) && !fs::is_directory(config.out_dir))
    throw FormatError("output path exists and is not a directory: " + config.out_dir.string());
}

inline json experiment_header(const std::string& command, const std::string& reproduces) {
  return {{"command", command}, {"reproduces", reproduces}};
}

inline int run_sweep(const ExperimentConfig& config, std::ostream& log) {
  check_common(config);
  const ChamberModel model = load_model(config);
  SweepOptions options;
  options.step = config.sweep_step;
  options.hold_seconds = config.hold_seconds;
  options.sample_rate = config.sample_rate;
  sweep_levels(options);  // validates the step before any output

  const SweepRecord record = static_sweep(chamber_sweep_system(model), options);
  const auto curve = pool_operating_curve(record);

  write_sweep_record(config.out_dir / "sweep", record);
  write_file_atomic(config.out_dir / "pooled_curve.csv", curve_to_csv(curve));

  std::vector<double> t, p, q;
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const auto& s = record.steps[i];
    const double t0 = static_cast<double>(i) * record.hold_seconds;
    for (std::size_t n = 0; n < s.pressure.size(); ++n) {
      t.push_back(t0 + s.pressure.time_at(n));
      p.push_back(s.pressure[n]);
      q.push_back(s.flow[n]);
    }
  }
  std::vector<double> cq, cp;
  for (const auto& c : curve) {
    cq.push_back(c.q_lps);
    cp.push_back(c.p_pa);
  }
  write_file_atomic(config.out_dir / "sweep.svg",
                    svg::render({{"Valve sweep: chamber pressure", "time (s)", "pressure (Pa)", {{"pressure", t, p}}},
                                 {"Valve sweep: inlet flow", "time (s)", "flow (L/s)", {{"flow", t, q, "#b03a2e"}}},
                                 {"Pooled operating curve", "flow (L/s)", "pressure (Pa)",
                                  {{"steady points", cq, cp, "#1f4e9c", true}}}}));

  json summary = experiment_header("sweep", "valve sweep and pooled fan operating curve");
  summary["steps"] = record.steps.size();
  summary["low_flow_point"] = {{"q_lps", curve.front().q_lps}, {"p_pa", curve.front().p_pa}};
  summary["high_flow_point"] = {{"q_lps", curve.back().q_lps}, {"p_pa", curve.back().p_pa}};
  if (record.error) summary["error"] = {{"step_index", record.error->step_index}, {"message", record.error->message}};
  write_file_atomic(config.out_dir / "sweep_summary.json", dump_json(summary));

  log << "sweep: " << record.steps.size() << " steps, pressure " << curve.back().p_pa << " .. " << curve.front().p_pa
      << " Pa, flow " << curve.front().q_lps << " .. " << curve.back().q_lps << " L/s\n";
  return record.error ? kExitVerificationFailed : kExitOk;
}

inline ResponseOptions response_options(const ExperimentConfig& config) {
  ResponseOptions options;
  options.f0 = config.f0;
  options.max_k = config.max_k;
  options.amplitude = config.amplitude;
  options.offset = config.offset;
  options.sample_rate = config.sample_rate;
  return options;
}

inline int run_bode(const ExperimentConfig& config, std::ostream& log) {
  check_common(config);
  const ChamberModel model = load_model(config);
  const FrequencyResponse response = measure_frequency_response(chamber_response_system(model), response_options(config));
  double reference = 1.0;
  if (config.bode_reference_first) {
    const ResponseEntry* first = response.find(1);
    if (first == nullptr || !first->usable) throw std::runtime_error("first harmonic unusable as a reference");
    reference = first->gain;
  }
  const BodeTable table = bode_export(response, reference);

  write_file_atomic(config.out_dir / "bode.csv", bode_to_csv(table));
  write_file_atomic(config.out_dir / "response.json", dump_json(response_to_json(response)));

  std::vector<double> f, g, ph;
  for (const auto& r : table.rows) {
    f.push_back(r.f_hz);
    g.push_back(r.gain_db);
    ph.push_back(r.phase_deg);
  }
  write_file_atomic(config.out_dir / "bode.svg",
                    svg::render({{"Gain, sensor volts / drive volts", "frequency (Hz)", "gain (dB)",
                                  {{"", f, g, "#1f4e9c", true}}, true},
                                 {"Phase delay", "frequency (Hz)", "phase delay (deg)", {{"", f, ph, "#b03a2e", true}},
                                  true}}));

  json summary = experiment_header("bode", "stepped-sine Bode magnitude and phase");
  summary["rows"] = table.rows.size();
  summary["reference_gain"] = reference;
  summary["excluded_k"] = table.excluded;
  write_file_atomic(config.out_dir / "bode_summary.json", dump_json(summary));

  log << "bode: " << table.rows.size() << " rows";
  if (!table.rows.empty())
    log << ", gain " << table.rows.front().gain_db << " dB at " << table.rows.front().f_hz << " Hz to "
        << table.rows.back().gain_db << " dB at " << table.rows.back().f_hz << " Hz";
  log << "\n";
  return table.excluded.empty() ? kExitOk : kExitVerificationFailed;
}

struct ToneResult {
  double amplitude_pa = 0.0;
  double mean_pa = 0.0;
  double phase_delay_deg = 0.0;
};

/// One stepped-sine burst through the model, measured over the guard window.
inline ToneResult measure_tone(const ChamberModel& model, double frequency, const ExperimentConfig& config,
                               Waveform* drive_out = nullptr, Waveform* response_out = nullptr) {
  ResponseOptions options = response_options(config);
  const Waveform drive = stepped_sine(frequency, options.cycles, config.amplitude, config.offset, config.sample_rate,
                                      options.taper_cycles);
  const Waveform pressure = simulate(model, drive).pressure;
  const auto [first, last] = burst_window(frequency, options);
  const ToneEstimate in = fit_tone(std::span(drive.samples()).subspan(first, last - first), frequency,
                                   config.sample_rate, first);
  const ToneEstimate out = fit_tone(std::span(pressure.samples()).subspan(first, last - first), frequency,
                                    config.sample_rate, first);
  if (drive_out) *drive_out = drive;
  if (response_out) *response_out = pressure;
  return {out.amplitude, out.dc, wrap_phase(in.phase - out.phase) * 180.0 / kPi};
}

inline int run_tone(const ExperimentConfig& config, std::ostream& log) {
  check_common(config);
  if (!(config.tone_hz > 0.0)) throw std::invalid_argument("tone frequency must be positive");
  const ChamberModel model = load_model(config);

  Waveform drive({0.0}, config.sample_rate, Unit::volts);
  Waveform response({0.0}, config.sample_rate, Unit::pascals);
  const ToneResult tone = measure_tone(model, config.tone_hz, config, &drive, &response);

  const std::string stem = "tone_" + format_double(config.tone_hz) + "Hz";
  write_waveform_csv(config.out_dir / (stem + "_drive.csv"), drive);
  write_waveform_csv(config.out_dir / (stem + "_response.csv"), response);

  std::vector<double> sensor(response.samples());
  for (double& x : sensor) x /= model.baratron_pa_per_volt;
  const auto t = svg::time_axis(drive.size(), drive.sample_rate());
  write_file_atomic(config.out_dir / (stem + ".svg"),
                    svg::render({{"Tone at " + format_double(config.tone_hz) + " Hz", "time (s)", "volts",
                                  {{"modulator drive (V)", t, drive.samples()},
                                   {"pressure sensor (V)", t, sensor, "#b03a2e"}}}}));

  json summary = experiment_header("tone", "single-tone chamber response, drive vs pressure");
  summary["freq_hz"] = config.tone_hz;
  summary["amplitude_pa"] = tone.amplitude_pa;
  summary["mean_pa"] = tone.mean_pa;
  summary["phase_delay_deg"] = tone.phase_delay_deg;
  write_file_atomic(config.out_dir / (stem + "_summary.json"), dump_json(summary));

  log << "tone " << config.tone_hz << " Hz: amplitude " << tone.amplitude_pa << " Pa about " << tone.mean_pa
      << " Pa, phase delay " << tone.phase_delay_deg << " deg\n";
  return kExitOk;
}

inline int run_replicate(const ExperimentConfig& config, std::ostream& log) {
  check_common(config);
  const ChamberModel model = load_model(config);
  PulseSpec pulse = reference_turbine_pulse(config.f0, 0.15, config.n_harmonics);
  if (config.pulse_path) {
    if (!fs::exists(*config.pulse_path)) throw FormatError("pulse file not found: " + config.pulse_path->string());
    pulse = pulse_from_waveform(read_waveform_csv(*config.pulse_path), config.f0, config.n_harmonics);
  }
  if (pulse.spectrum.max_k() > config.max_k)
    throw std::invalid_argument("pulse uses harmonics above max_k=" + std::to_string(config.max_k));

  const FrequencyResponse response = measure_frequency_response(chamber_response_system(model), response_options(config));

  RoundtripOptions options;
  options.compensate = config.compensate;
  options.drive.offset = config.offset;
  options.drive.sample_rate = config.sample_rate;
  options.drive.drive_scale = config.drive_scale.value_or(1.0 / model.baratron_pa_per_volt);
  const Reproduction result = reproduce_pulse(pulse, model, response, options);
  const ReproductionReport& report = result.report;

  const double rate = config.sample_rate;
  const auto first = static_cast<std::size_t>(std::llround(options.skip_head_periods * rate / pulse.f0));
  const Waveform driven = synthesize_harmonics(result.driven_spectrum, options.drive.n_periods / pulse.f0, rate);
  std::string overlay = "time_s,target_pa,compensated_pa,achieved_pa,drive_v\n";
  std::vector<double> t, target, comp, achieved;
  for (std::size_t n = 0; n < result.target.size(); ++n) {
    const std::size_t abs_n = first + n;
    const double time = static_cast<double>(abs_n) / rate;
    overlay += format_double(time) + ',' + format_double(result.target[n]) + ',' + format_double(driven[abs_n]) + ',' +
               format_double(result.achieved[n]) + ',' + format_double(result.drive[abs_n]) + '\n';
    t.push_back(time);
    target.push_back(result.target[n]);
    comp.push_back(driven[abs_n]);
    achieved.push_back(result.achieved[n]);
  }

  write_file_atomic(config.out_dir / "replicate_overlay.csv", overlay);
  write_file_atomic(config.out_dir / "pulse_spectrum.json", dump_json(spectrum_to_json(pulse.spectrum)));
  write_file_atomic(config.out_dir / "compensated_spectrum.json", dump_json(spectrum_to_json(result.driven_spectrum)));
  write_file_atomic(config.out_dir / "response.json", dump_json(response_to_json(response)));

  const std::size_t zoom = std::min<std::size_t>(t.size(), static_cast<std::size_t>(std::llround(2.0 * rate / pulse.f0)));
  auto head = [zoom](const std::vector<double>& v) { return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(zoom)); };
  write_file_atomic(
      config.out_dir / "replicate.svg",
      svg::render({{config.compensate ? "Pre-compensated drive vs target pulse" : "Uncompensated drive vs target pulse",
                    "time (s)", "Pa (target units)",
                    {{"target", head(t), head(target)}, {"drive signal", head(t), head(comp), "#b03a2e"}}},
                   {"Reconstructed pulse in the chamber", "time (s)", "Pa (target units)",
                    {{"target", head(t), head(target)}, {"chamber", head(t), head(achieved), "#b03a2e"}}}}));

  json out = report_to_json(report);
  json meta = experiment_header("replicate", "pre-compensated turbine pulse reproduced in the chamber");
  meta["compensated"] = config.compensate;
  meta["drive_scale_v_per_pa"] = options.drive.drive_scale;
  meta["pulse_source"] = pulse.source == PulseSource::measured_file ? "measured_file" : "reference_synthetic";
  meta["level"] = report.level == LevelClass::above_setback   ? "above_setback_range"
                  : report.level == LevelClass::within_setback ? "within_setback_range"
                                                               : "below_setback_range";
  out["metadata"] = std::move(meta);
  write_file_atomic(config.out_dir / "replicate_report.json", dump_json(out));

  log << "replicate: rms error " << report.rms_rel_err << ", peak " << report.peak_pa << " Pa (" << report.peak_db
      << " dB) over " << report.periods_compared << " periods\n";
  if (report.level == LevelClass::above_setback) log << "note: achieved level exceeds field levels at setback distance\n";
  return report.rms_rel_err <= config.rms_tolerance ? kExitOk : kExitVerificationFailed;
}

/// Runs a command, mapping configuration and I/O failures to exit code 2.
template <class Command>
int run_guarded(Command&& command, const ExperimentConfig& config, std::ostream& log, std::ostream& err) {
  try {
    return command(config, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace infrachamber
