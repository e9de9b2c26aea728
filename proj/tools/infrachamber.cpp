// Command-line front end: sweep, bode, tone and replicate experiments
// against the simulated chamber.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "infrachamber/experiments.hpp"

int main(int argc, char** argv) {
  using namespace infrachamber;

  ExperimentConfig config;
  std::string chamber;
  std::string out_dir = config.out_dir.string();

  CLI::App app{"Infrasound chamber simulator and pulse replication pipeline"};
  app.require_subcommand(1);
  app.add_option("--config", chamber, "chamber configuration JSON (default: built-in chamber)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--sample-rate", config.sample_rate, "sample rate in Hz")->capture_default_str();
  app.add_option("--f0", config.f0, "fundamental frequency in Hz")->capture_default_str();
  app.add_option("--max-k", config.max_k, "highest harmonic to measure")->capture_default_str();
  app.add_option("--amplitude", config.amplitude, "stepped-sine amplitude in volts")->capture_default_str();
  app.add_option("--offset", config.offset, "neutral modulator voltage")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "static valve sweep and pooled operating curve");
  sweep->add_option("--step", config.sweep_step, "voltage step")->capture_default_str();
  sweep->add_option("--hold", config.hold_seconds, "hold time per step in seconds")->capture_default_str();

  auto* bode = app.add_subcommand("bode", "stepped-sine frequency response");
  bode->add_flag("--reference-first", config.bode_reference_first, "express gain relative to the first harmonic");

  auto* tone = app.add_subcommand("tone", "single stepped-sine burst");
  tone->add_option("--freq", config.tone_hz, "tone frequency in Hz")->required();

  auto* replicate = app.add_subcommand("replicate", "pre-compensated turbine pulse replication");
  std::string pulse;
  bool reference = false;
  bool no_compensate = false;
  double drive_scale = 0.0;
  auto* pulse_opt = replicate->add_option("--pulse", pulse, "pulse waveform CSV in pascals");
  replicate->add_flag("--reference", reference, "use the built-in reference pulse")->excludes(pulse_opt);
  replicate->add_flag("--no-compensate", no_compensate, "drive the raw pulse without pre-compensation");
  auto* scale_opt = replicate->add_option("--drive-scale", drive_scale, "modulator volts per pascal");
  replicate->add_option("--harmonics", config.n_harmonics, "harmonics kept from the pulse")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (!chamber.empty()) config.chamber_path = chamber;
  config.out_dir = out_dir;
  if (!pulse.empty()) config.pulse_path = pulse;
  config.compensate = !no_compensate;
  if (scale_opt->count() > 0) config.drive_scale = drive_scale;

  if (sweep->parsed()) return run_guarded(run_sweep, config, std::cout, std::cerr);
  if (bode->parsed()) return run_guarded(run_bode, config, std::cout, std::cerr);
  if (tone->parsed()) return run_guarded(run_tone, config, std::cout, std::cerr);
  return run_guarded(run_replicate, config, std::cout, std::cerr);
}
