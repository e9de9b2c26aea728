#pragma once

// File formats: waveform CSV, spectrum/response/chamber/report JSON, Bode
// CSV and the sweep-record directory. Numbers are written in shortest
// round-trip form so repeated runs produce identical bytes.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "infrachamber/chamber.hpp"
#include "infrachamber/compensation.hpp"
#include "infrachamber/signal.hpp"
#include "infrachamber/sysid.hpp"

namespace infrachamber {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FormatError("not a number: '" + std::string(text) + "'");
  return value;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes via a temporary file and rename, so readers never see partial output.
inline void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---- waveform CSV: time_s,value,unit ----

inline std::string waveform_to_csv(const Waveform& wave) {
  std::string out = "time_s,value,unit\n";
  const std::string unit(unit_name(wave.unit()));
  for (std::size_t n = 0; n < wave.size(); ++n) {
    out += format_double(wave.time_at(n));
    out += ',';
    out += format_double(wave[n]);
    out += ',';
    out += unit;
    out += '\n';
  }
  return out;
}

inline Waveform waveform_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("waveform CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_s,value,unit") throw FormatError("waveform CSV header must be 'time_s,value,unit'");

  std::vector<double> times;
  std::vector<double> values;
  std::optional<Unit> unit;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw FormatError("row " + std::to_string(row) + ": expected three columns");
    const std::string_view view(line);
    times.push_back(parse_double(view.substr(0, c1)));
    values.push_back(parse_double(view.substr(c1 + 1, c2 - c1 - 1)));
    Unit u;
    try {
      u = parse_unit(view.substr(c2 + 1));
    } catch (const std::invalid_argument& e) {
      throw FormatError("row " + std::to_string(row) + ": " + e.what());
    }
    if (unit && *unit != u) throw FormatError("row " + std::to_string(row) + ": unit changes within the file");
    unit = u;
  }
  if (times.size() < 2) throw FormatError("waveform CSV needs at least two samples");

  const double span = times.back() - times.front();
  if (!(span > 0.0)) throw FormatError("waveform times must increase");
  double rate = static_cast<double>(times.size() - 1) / span;
  if (std::abs(rate - std::round(rate)) < 1e-6 * rate) rate = std::round(rate);
  const double dt = 1.0 / rate;
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (n > 0 && !(times[n] > times[n - 1]))
      throw FormatError("row " + std::to_string(n + 2) + ": time not strictly increasing");
    if (std::abs(times[n] - times.front() - static_cast<double>(n) * dt) > 1e-3 * dt)
      throw FormatError("row " + std::to_string(n + 2) + ": samples are not uniformly spaced");
  }
  return Waveform(std::move(values), rate, *unit);
}

inline void write_waveform_csv(const fs::path& path, const Waveform& wave) {
  write_file_atomic(path, waveform_to_csv(wave));
}

inline Waveform read_waveform_csv(const fs::path& path) { return waveform_from_csv(read_text_file(path)); }

// ---- spectrum and response JSON ----

inline json spectrum_to_json(const HarmonicSpectrum& spectrum) {
  json components = json::array();
  for (const auto& c : spectrum.components())
    components.push_back({{"k", c.k}, {"magnitude", c.magnitude}, {"phase_rad", c.phase}});
  return {{"f0_hz", spectrum.f0()}, {"components", std::move(components)}};
}

inline HarmonicSpectrum spectrum_from_json(const json& j) {
  try {
    std::vector<Harmonic> components;
    for (const auto& c : j.at("components"))
      components.push_back({c.at("k").get<int>(), c.at("magnitude").get<double>(), c.at("phase_rad").get<double>()});
    return HarmonicSpectrum(j.at("f0_hz").get<double>(), std::move(components));
  } catch (const json::exception& e) {
    throw FormatError(std::string("spectrum JSON: ") + e.what());
  }
}

inline json response_to_json(const FrequencyResponse& response) {
  json entries = json::array();
  for (const auto& e : response.entries()) {
    json row = {{"k", e.k}, {"gain", e.gain}, {"phase_delay_rad", e.phase_delay}};
    if (!e.usable) row["usable"] = false;
    entries.push_back(std::move(row));
  }
  return {{"f0_hz", response.f0()}, {"entries", std::move(entries)}};
}

inline FrequencyResponse response_from_json(const json& j) {
  try {
    std::vector<ResponseEntry> entries;
    for (const auto& e : j.at("entries"))
      entries.push_back({e.at("k").get<int>(), e.at("gain").get<double>(), e.at("phase_delay_rad").get<double>(),
                         e.value("usable", true)});
    return FrequencyResponse(j.at("f0_hz").get<double>(), std::move(entries));
  } catch (const json::exception& e) {
    throw FormatError(std::string("response JSON: ") + e.what());
  }
}

// ---- chamber configuration JSON ----

inline json chamber_to_json(const ChamberModel& model) {
  json fan;
  if (const auto* p = model.fan.parameters()) {
    fan = {{"p_max_pa", p->p_max_pa}, {"q_max_lps", p->q_max_lps}};
    if (p->exponent != 2.0) fan["shape_exponent"] = p->exponent;
  } else {
    json table = json::array();
    for (const auto& pt : *model.fan.table()) table.push_back({pt.q_lps, pt.p_pa});
    fan = {{"table", std::move(table)}};
  }
  json points = json::array();
  for (const auto& pt : model.valve.points()) points.push_back({pt.volts, pt.area_m2});
  return {{"volume_m3", model.volume_m3},
          {"rho", model.rho},
          {"gamma_p0", model.gamma_p0},
          {"inlet_diameter_m", model.inlet_diameter_m},
          {"baratron_pa_per_volt", model.baratron_pa_per_volt},
          {"fan", std::move(fan)},
          {"valve", {{"points", std::move(points)}}}};
}

/// Fields left out of the JSON take the default chamber's values.
inline ChamberModel chamber_from_json(const json& j) {
  try {
    ChamberModel model = default_chamber_model();
    model.volume_m3 = j.value("volume_m3", model.volume_m3);
    model.rho = j.value("rho", model.rho);
    model.gamma_p0 = j.value("gamma_p0", model.gamma_p0);
    model.inlet_diameter_m = j.value("inlet_diameter_m", model.inlet_diameter_m);
    model.baratron_pa_per_volt = j.value("baratron_pa_per_volt", model.baratron_pa_per_volt);
    if (j.contains("fan")) {
      const json& fan = j.at("fan");
      if (fan.contains("table")) {
        std::vector<FanCurve::Point> pts;
        for (const auto& row : fan.at("table")) pts.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
        model.fan = FanCurve::tabulated(std::move(pts));
      } else {
        model.fan = FanCurve::parametric(fan.at("p_max_pa").get<double>(), fan.at("q_max_lps").get<double>(),
                                         fan.value("shape_exponent", 2.0));
      }
    }
    if (j.contains("valve")) {
      std::vector<ValveMap::Point> pts;
      for (const auto& row : j.at("valve").at("points")) pts.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
      model.valve = ValveMap(std::move(pts));
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("chamber JSON: ") + e.what());
  }
}

inline ChamberModel load_chamber_config(const fs::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return chamber_from_json(j);
}

// ---- Bode table CSV: k,f_hz,gain_db,phase_deg ----

inline std::string bode_to_csv(const BodeTable& table) {
  std::string out = "k,f_hz,gain_db,phase_deg\n";
  for (const auto& r : table.rows)
    out += std::to_string(r.k) + ',' + format_double(r.f_hz) + ',' + format_double(r.gain_db) + ',' +
           format_double(r.phase_deg) + '\n';
  return out;
}

// ---- reproduction report JSON ----

inline json report_to_json(const ReproductionReport& r) {
  return {{"rms_rel_err", r.rms_rel_err},      {"peak_rel_err", r.peak_rel_err},
          {"peak_pa", r.peak_pa},              {"peak_db", r.peak_db},
          {"periods_compared", r.periods_compared}, {"within_setback_range", r.within_setback_range}};
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---- sweep record directory: index.json + one CSV per trace ----

inline void write_sweep_record(const fs::path& dir, const SweepRecord& record) {
  json steps = json::array();
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const auto& s = record.steps[i];
    char stem[32];
    std::snprintf(stem, sizeof(stem), "step_%02zu", i);
    const std::string pressure_file = std::string(stem) + "_pressure.csv";
    const std::string flow_file = std::string(stem) + "_flow.csv";
    write_waveform_csv(dir / pressure_file, s.pressure);
    write_waveform_csv(dir / flow_file, s.flow);
    steps.push_back({{"v", s.volts}, {"pressure_file", pressure_file}, {"flow_file", flow_file}});
  }
  json index = {{"steps", std::move(steps)}, {"hold_s", record.hold_seconds}};
  if (record.error)
    index["error"] = {{"step_index", record.error->step_index}, {"v", record.error->volts},
                      {"message", record.error->message}};
  write_file_atomic(dir / "index.json", dump_json(index));
}

inline SweepRecord read_sweep_record(const fs::path& dir) {
  json index;
  try {
    index = json::parse(read_text_file(dir / "index.json"));
  } catch (const json::exception& e) {
    throw FormatError("sweep index: " + std::string(e.what()));
  }
  SweepRecord record;
  try {
    record.hold_seconds = index.at("hold_s").get<double>();
    for (const auto& s : index.at("steps")) {
      Waveform p = read_waveform_csv(dir / s.at("pressure_file").get<std::string>());
      Waveform q = read_waveform_csv(dir / s.at("flow_file").get<std::string>());
      if (p.sample_rate() != q.sample_rate()) throw FormatError("sweep traces disagree on sample rate");
      const double ps = settled_mean(p);
      const double qs = settled_mean(q);
      record.steps.push_back({s.at("v").get<double>(), std::move(p), std::move(q), ps, qs});
    }
  } catch (const json::exception& e) {
    throw FormatError("sweep index: " + std::string(e.what()));
  }
  for (std::size_t i = 1; i < record.steps.size(); ++i)
    if (!(record.steps[i].volts > record.steps[i - 1].volts)) throw FormatError("sweep steps must be ordered by voltage");
  return record;
}

inline std::string curve_to_csv(const std::vector<CurvePoint>& points) {
  std::string out = "q_lps,p_pa\n";
  for (const auto& p : points) out += format_double(p.q_lps) + ',' + format_double(p.p_pa) + '\n';
  return out;
}

}  // namespace infrachamber
