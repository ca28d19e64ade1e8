#pragma once

// File formats. Array data is CSV, everything else is key/value text (see
// keyvalue.hpp). Interface units: nm, ns, V, dB/cm.
//
// Spectrum CSV
//   wavelength_nm,transmission      (or wavelength_nm,counts)
//   910.000000000,0.998712
// Lines starting with '#' are skipped. Wavelengths must strictly ascend.
//
// Histogram CSV
//   #@ kind = decay                 (or correlation)
//   #@ irf_sigma_ns = 0.0421        (decay only)
//   #@ repetition_period_ns = 12.5  (correlation only)
//   bin_lo_ns,bin_hi_ns,counts
//
// Tuning CSV
//   voltage_V,wavelength_nm
//
// Mode field
//   dims = nx ny nz
//   cell_volume_m3 = 1e-21
//   wavelength_nm = 910            (optional)
//   refractive_index = 2.2         (optional)
//   data
//   eps E2                          (nx*ny*nz rows, x fastest)
//
// Numbers in CSV files carry 12 significant digits, so a file re-read and
// re-written is byte-identical, and quantize() gives the in-memory value a
// file round trip produces.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ringqed/cqed.hpp"
#include "ringqed/error.hpp"
#include "ringqed/keyvalue.hpp"
#include "ringqed/lsq.hpp"
#include "ringqed/noise.hpp"
#include "ringqed/planner.hpp"
#include "ringqed/records.hpp"
#include "ringqed/resonator.hpp"
#include "ringqed/strain.hpp"
#include "ringqed/units.hpp"

namespace ringqed::io {

inline constexpr int csv_digits = 12;
inline constexpr std::string_view version = "0.1.0";

inline std::string csv_number(double x) { return kv::format_double(x, csv_digits); }

inline double quantize(double x) { return *kv::parse_double(csv_number(x)); }

inline void quantize(std::vector<double>& v) {
  for (auto& x : v) x = quantize(x);
}

// ---------------------------------------------------------------------------
// CSV

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;                         // source line per row
  std::vector<std::pair<std::string, std::string>> meta;  // "#@ key = value"

  std::optional<std::string> meta_value(std::string_view key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(kv::trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table parse_csv(std::string_view text, const std::string& source) {
  Table t;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  auto error = [&](const std::string& what) {
    fail(ErrorKind::ParseError, source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = kv::trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("#@")) {
      const auto body = line.substr(2);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) error("metadata line needs 'key = value'");
      t.meta.emplace_back(std::string(kv::trim(body.substr(0, eq))), std::string(kv::trim(body.substr(eq + 1))));
      continue;
    }
    if (line.front() == '#') continue;
    auto cells = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      error("expected " + std::to_string(t.header.size()) + " columns, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      const auto v = kv::parse_double(c);
      if (!v || !std::isfinite(*v)) error("'" + c + "' is not a finite number");
      row.push_back(*v);
    }
    t.rows.push_back(std::move(row));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) fail(ErrorKind::ParseError, source + ": missing CSV header");
  return t;
}

inline void expect_header(const Table& t, const std::vector<std::string>& names, const std::string& source) {
  if (t.header != names) {
    std::string want;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    fail(ErrorKind::ParseError, source + ": expected header '" + want + "'");
  }
}

/// Column values with a strictly ascending check that names the offending line.
inline std::vector<double> ascending_column(const Table& t, std::size_t col, const std::string& source) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double v = t.rows[i][col];
    if (!out.empty() && !(v > out.back()))
      fail(ErrorKind::NonMonotonicAxis, source + ":" + std::to_string(t.lines[i]) + ": " + t.header[col] + " " +
                                            csv_number(v) + (v == out.back() ? " repeats" : " descends"));
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectra

inline Spectrum parse_spectrum(std::string_view text, const std::string& source = "<memory>") {
  const auto t = parse_csv(text, source);
  Spectrum s;
  if (t.header == std::vector<std::string>{"wavelength_nm", "counts"}) {
    s.kind = SpectrumKind::counts;
  } else {
    expect_header(t, {"wavelength_nm", "transmission"}, source);
  }
  if (t.rows.empty()) fail(ErrorKind::EmptyGrid, source + ": spectrum has no data rows");
  s.wavelength_nm = ascending_column(t, 0, source);
  for (const auto& r : t.rows) s.values.push_back(r[1]);
  s.validate();
  return s;
}

inline Spectrum ingest_spectrum(const std::filesystem::path& path) {
  return parse_spectrum(kv::read_text_file(path), path.string());
}

inline std::string format_spectrum(const Spectrum& s) {
  s.validate();
  std::string out = "wavelength_nm," + std::string(to_string(s.kind)) + "\n";
  for (std::size_t i = 0; i < s.size(); ++i) out += csv_number(s.wavelength_nm[i]) + "," + csv_number(s.values[i]) + "\n";
  return out;
}

inline Spectrum quantize(Spectrum s) {
  quantize(s.wavelength_nm);
  quantize(s.values);
  return s;
}

// ---------------------------------------------------------------------------
// Histograms

namespace detail {
inline void read_bins(const Table& t, const std::string& source, std::vector<double>& edges,
                      std::vector<double>& counts) {
  expect_header(t, {"bin_lo_ns", "bin_hi_ns", "counts"}, source);
  if (t.rows.empty()) fail(ErrorKind::EmptyGrid, source + ": histogram has no bins");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (i == 0) edges.push_back(r[0]);
    if (r[0] != edges.back())
      fail(ErrorKind::NonMonotonicAxis, source + ":" + std::to_string(t.lines[i]) + ": bins are not contiguous");
    if (!(r[1] > r[0]))
      fail(ErrorKind::NonMonotonicAxis, source + ":" + std::to_string(t.lines[i]) + ": bin edges must ascend");
    edges.push_back(r[1]);
    counts.push_back(r[2]);
  }
}

inline double meta_number(const Table& t, std::string_view key, const std::string& source) {
  const auto v = t.meta_value(key);
  if (!v) fail(ErrorKind::ParseError, source + ": missing metadata '#@ " + std::string(key) + " = ...'");
  const auto x = kv::parse_double(*v);
  if (!x) fail(ErrorKind::ParseError, source + ": metadata '" + std::string(key) + "' is not a number");
  return *x;
}

inline void expect_kind(const Table& t, std::string_view kind, const std::string& source) {
  const auto v = t.meta_value("kind");
  if (v != std::optional<std::string>(std::string(kind)))
    fail(ErrorKind::ParseError, source + ": expected '#@ kind = " + std::string(kind) + "'");
}

inline std::string format_bins(const std::vector<double>& edges, const std::vector<double>& counts) {
  std::string out = "bin_lo_ns,bin_hi_ns,counts\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    out += csv_number(edges[i]) + "," + csv_number(edges[i + 1]) + "," + csv_number(counts[i]) + "\n";
  return out;
}
}  // namespace detail

inline DecayHistogram parse_decay_histogram(std::string_view text, const std::string& source = "<memory>") {
  const auto t = parse_csv(text, source);
  detail::expect_kind(t, "decay", source);
  DecayHistogram h;
  detail::read_bins(t, source, h.bin_edges_ns, h.counts);
  h.irf_sigma_ns = detail::meta_number(t, "irf_sigma_ns", source);
  h.validate();
  return h;
}

inline CorrelationHistogram parse_correlation_histogram(std::string_view text, const std::string& source = "<memory>") {
  const auto t = parse_csv(text, source);
  detail::expect_kind(t, "correlation", source);
  CorrelationHistogram h;
  detail::read_bins(t, source, h.bin_edges_ns, h.counts);
  h.repetition_period_ns = detail::meta_number(t, "repetition_period_ns", source);
  h.validate();
  return h;
}

inline std::string format_histogram(const DecayHistogram& h) {
  h.validate();
  return "#@ kind = decay\n#@ irf_sigma_ns = " + csv_number(h.irf_sigma_ns) + "\n" +
         detail::format_bins(h.bin_edges_ns, h.counts);
}

inline std::string format_histogram(const CorrelationHistogram& h) {
  h.validate();
  return "#@ kind = correlation\n#@ repetition_period_ns = " + csv_number(h.repetition_period_ns) + "\n" +
         detail::format_bins(h.bin_edges_ns, h.counts);
}

template <class Histogram>
Histogram quantize(Histogram h) {
  quantize(h.bin_edges_ns);
  quantize(h.counts);
  if constexpr (requires { h.irf_sigma_ns; }) h.irf_sigma_ns = quantize(h.irf_sigma_ns);
  if constexpr (requires { h.repetition_period_ns; }) h.repetition_period_ns = quantize(h.repetition_period_ns);
  return h;
}

// ---------------------------------------------------------------------------
// Tuning sweeps

struct TuningSweep {
  std::vector<double> voltage_V;
  std::vector<double> wavelength_nm;
  bool operator==(const TuningSweep&) const = default;
};

inline TuningSweep parse_tuning_sweep(std::string_view text, const std::string& source = "<memory>") {
  const auto t = parse_csv(text, source);
  expect_header(t, {"voltage_V", "wavelength_nm"}, source);
  TuningSweep s;
  for (const auto& r : t.rows) {
    s.voltage_V.push_back(r[0]);
    s.wavelength_nm.push_back(r[1]);
  }
  return s;
}

inline std::string format_tuning_sweep(const TuningSweep& s) {
  std::string out = "voltage_V,wavelength_nm\n";
  for (std::size_t i = 0; i < s.voltage_V.size(); ++i)
    out += csv_number(s.voltage_V[i]) + "," + csv_number(s.wavelength_nm[i]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Mode fields

struct ModeFieldFile {
  resonator::ModeField field;
  std::optional<double> wavelength_nm;
  std::optional<double> refractive_index;
};

inline ModeFieldFile parse_mode_field(std::string_view text, const std::string& source = "<memory>") {
  ModeFieldFile out;
  auto& f = out.field;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  bool in_data = false, have_dims = false;
  auto error = [&](const std::string& what) {
    fail(ErrorKind::ParseError, source + ":" + std::to_string(lineno) + ": " + what);
  };
  auto number = [&](std::string_view s) {
    const auto v = kv::parse_double(s);
    if (!v) error("'" + std::string(s) + "' is not a number");
    return *v;
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = kv::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (in_data) {
      std::istringstream cells{std::string(line)};
      std::string a, b, extra;
      if (!(cells >> a >> b) || (cells >> extra)) error("data rows hold exactly two numbers: eps E2");
      f.permittivity.push_back(number(a));
      f.field_sq.push_back(number(b));
      continue;
    }
    if (line == "data") {
      if (!have_dims || f.cell_volume_m3 == 0.0) error("'dims' and 'cell_volume_m3' must precede 'data'");
      in_data = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) error("expected 'key = value' or 'data'");
    const auto key = kv::trim(line.substr(0, eq));
    const auto value = std::string(kv::trim(line.substr(eq + 1)));
    if (key == "dims") {
      std::istringstream d{value};
      long long nx = 0, ny = 0, nz = 0;
      if (!(d >> nx >> ny >> nz) || nx <= 0 || ny <= 0 || nz <= 0) error("dims needs three positive integers");
      f.nx = static_cast<std::size_t>(nx), f.ny = static_cast<std::size_t>(ny), f.nz = static_cast<std::size_t>(nz);
      have_dims = true;
    } else if (key == "cell_volume_m3") {
      f.cell_volume_m3 = number(value);
    } else if (key == "wavelength_nm") {
      out.wavelength_nm = number(value);
    } else if (key == "refractive_index") {
      out.refractive_index = number(value);
    } else {
      error("unknown key '" + std::string(key) + "'");
    }
  }
  if (!in_data) fail(ErrorKind::ParseError, source + ": missing 'data' block");
  if (f.permittivity.size() != f.cells())
    fail(ErrorKind::ParseError, source + ": expected " + std::to_string(f.cells()) + " data rows, found " +
                                    std::to_string(f.permittivity.size()));
  f.validate();
  return out;
}

inline std::string format_mode_field(const ModeFieldFile& m) {
  const auto& f = m.field;
  f.validate();
  std::string out = "dims = " + std::to_string(f.nx) + " " + std::to_string(f.ny) + " " + std::to_string(f.nz) + "\n";
  out += "cell_volume_m3 = " + kv::format_double(f.cell_volume_m3) + "\n";
  if (m.wavelength_nm) out += "wavelength_nm = " + kv::format_double(*m.wavelength_nm) + "\n";
  if (m.refractive_index) out += "refractive_index = " + kv::format_double(*m.refractive_index) + "\n";
  out += "data\n";
  for (std::size_t i = 0; i < f.cells(); ++i)
    out += kv::format_double(f.permittivity[i]) + " " + kv::format_double(f.field_sq[i]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration
//
//   [run]     materials_db, seed, output_dir
//   [ring]    total_length_um, gaas_length_um, taper_length_um, taper_count,
//             group_index, design_wavelength_nm
//   [loss]    alpha_gaas_dB_per_cm, alpha_ln_dB_per_cm, taper_efficiency,
//             alpha_taper_dB_per_cm (optional, else from the efficiency)
//   [coupling] self_coupling (optional, else critical)
//   [strain]  emission_wavelength_nm, electrode_gap_um, tuning_rate_pm_per_V,
//             clamping_factor, suspended, v_min_V, v_max_V
//   [emitter] qd_wavelength_nm, cavity_linewidth_nm, purcell_on_resonance,
//             free_rate_per_ns, irf_fwhm_ps, mode_volume_norm
//   [tuning]  gamma_s_pm_per_V, gamma_eo_pm_per_V, vs_min_V, vs_max_V,
//             veo_min_V, veo_max_V, resonance_tolerance_nm
//
// Every section is optional; missing keys keep the defaults below, which
// describe the reference hybrid device.

struct DeviceConfig {
  resonator::RingGeometry ring{196.74e-6, 5e-6, 10.5e-6, 2, 2.3, 910e-9};
  resonator::LossBudget loss{75.0, 0.0, 8.21, 0.982};
  std::optional<double> self_coupling;
  strain::StrainTuningDevice strain;
  cqed::EmitterCavityState emitter{910.0, 910.0, 0.0479, 3.52, 0.42};
  double irf_fwhm_ps = 99.3;
  double mode_volume_norm = 96.4;
  plan::DeviceTuningSpec tuning;

  DeviceConfig() { loss.alpha_taper = resonator::taper_loss_per_length(loss.taper_efficiency, ring.taper_length_m); }

  double total_loss_db_per_cm() const { return resonator::total_loss(ring, loss); }
  double quality() const { return resonator::quality_factor(ring, total_loss_db_per_cm()); }
  double irf_sigma_ns() const { return units::fwhm_to_sigma(irf_fwhm_ps * 1e-3); }

  resonator::CouplingState coupling() const {
    const double a = resonator::round_trip_amplitude(ring, total_loss_db_per_cm());
    return {self_coupling.value_or(a), a};
  }
};

struct RunConfig {
  std::filesystem::path materials_db;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> output_dir;
  DeviceConfig device;
  std::string text;  // source text, hashed into manifests
};

inline RunConfig parse_run_config(std::string_view text, const std::string& source = "<memory>",
                                  const std::filesystem::path& base_dir = ".") {
  const auto doc = kv::parse(text, source);
  doc.reject_unknown_sections({"run", "ring", "loss", "coupling", "strain", "emitter", "tuning"});
  RunConfig rc;
  rc.text = std::string(text);
  auto& d = rc.device;
  static const kv::Section empty;

  auto sec = [&](std::string_view name) -> const kv::Section& {
    const auto* s = doc.find(name);
    return s ? *s : empty;
  };

  const auto& run = sec("run");
  run.reject_unknown({"materials_db", "seed", "output_dir"});
  if (run.has("materials_db")) {
    rc.materials_db = base_dir / run.text("materials_db");
    if (!std::filesystem::exists(rc.materials_db))
      run.error_at(run.entry("materials_db").line, "materials database '" + rc.materials_db.string() + "' not found");
  }
  if (run.has("seed")) {
    const auto s = run.integer("seed");
    if (s < 0) run.error_at(run.entry("seed").line, "seed must be >= 0");
    rc.seed = static_cast<std::uint64_t>(s);
  }
  if (run.has("output_dir")) rc.output_dir = base_dir / run.text("output_dir");

  const auto& ring = sec("ring");
  ring.reject_unknown({"total_length_um", "gaas_length_um", "taper_length_um", "taper_count", "group_index",
                       "design_wavelength_nm"});
  d.ring.total_length_m = ring.number_or("total_length_um", d.ring.total_length_m / units::um) * units::um;
  d.ring.gaas_length_m = ring.number_or("gaas_length_um", d.ring.gaas_length_m / units::um) * units::um;
  d.ring.taper_length_m = ring.number_or("taper_length_um", d.ring.taper_length_m / units::um) * units::um;
  if (ring.has("taper_count")) d.ring.taper_count = static_cast<int>(ring.integer("taper_count"));
  d.ring.group_index = ring.number_or("group_index", d.ring.group_index);
  d.ring.design_wavelength_m = ring.number_or("design_wavelength_nm", d.ring.design_wavelength_m / units::nm) * units::nm;
  try {
    d.ring.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, source + ": [ring] " + e.what());
  }

  const auto& loss = sec("loss");
  loss.reject_unknown({"alpha_gaas_dB_per_cm", "alpha_ln_dB_per_cm", "taper_efficiency", "alpha_taper_dB_per_cm"});
  d.loss.alpha_gaas = loss.number_or("alpha_gaas_dB_per_cm", d.loss.alpha_gaas);
  d.loss.alpha_ln = loss.number_or("alpha_ln_dB_per_cm", d.loss.alpha_ln);
  d.loss.taper_efficiency = loss.number_or("taper_efficiency", d.loss.taper_efficiency);
  try {
    d.loss.alpha_taper = loss.has("alpha_taper_dB_per_cm")
                             ? loss.number("alpha_taper_dB_per_cm")
                             : resonator::taper_loss_per_length(d.loss.taper_efficiency, d.ring.taper_length_m);
    d.loss.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    fail(ErrorKind::ParseError, source + ": [loss] " + e.what());
  }

  const auto& coupling = sec("coupling");
  coupling.reject_unknown({"self_coupling"});
  if (coupling.has("self_coupling")) d.self_coupling = coupling.number("self_coupling");

  const auto& st = sec("strain");
  st.reject_unknown({"emission_wavelength_nm", "electrode_gap_um", "tuning_rate_pm_per_V", "clamping_factor",
                     "suspended", "v_min_V", "v_max_V"});
  d.strain.emission_wavelength_m =
      st.number_or("emission_wavelength_nm", d.strain.emission_wavelength_m / units::nm) * units::nm;
  d.strain.electrode_gap_m = st.number_or("electrode_gap_um", d.strain.electrode_gap_m / units::um) * units::um;
  d.strain.tuning_rate_pm_per_V = st.number_or("tuning_rate_pm_per_V", d.strain.tuning_rate_pm_per_V);
  d.strain.clamping_factor = st.number_or("clamping_factor", d.strain.clamping_factor);
  d.strain.suspended = st.boolean_or("suspended", d.strain.suspended);
  d.strain.v_min_V = st.number_or("v_min_V", d.strain.v_min_V);
  d.strain.v_max_V = st.number_or("v_max_V", d.strain.v_max_V);

  const auto& em = sec("emitter");
  em.reject_unknown({"qd_wavelength_nm", "cavity_linewidth_nm", "purcell_on_resonance", "free_rate_per_ns",
                     "irf_fwhm_ps", "mode_volume_norm"});
  d.emitter.qd_wavelength_nm = em.number_or("qd_wavelength_nm", d.emitter.qd_wavelength_nm);
  d.emitter.cavity_wavelength_nm = d.emitter.qd_wavelength_nm;
  d.emitter.cavity_linewidth_nm = em.number_or("cavity_linewidth_nm", d.emitter.cavity_linewidth_nm);
  d.emitter.purcell_on_resonance = em.number_or("purcell_on_resonance", d.emitter.purcell_on_resonance);
  d.emitter.free_rate_per_ns = em.number_or("free_rate_per_ns", d.emitter.free_rate_per_ns);
  d.irf_fwhm_ps = em.number_or("irf_fwhm_ps", d.irf_fwhm_ps);
  d.mode_volume_norm = em.number_or("mode_volume_norm", d.mode_volume_norm);
  if (!(d.irf_fwhm_ps >= 0)) em.error_at(em.entry("irf_fwhm_ps").line, "irf_fwhm_ps must be >= 0");
  if (!(d.mode_volume_norm > 0)) em.error_at(em.entry("mode_volume_norm").line, "mode_volume_norm must be > 0");

  const auto& tu = sec("tuning");
  tu.reject_unknown({"gamma_s_pm_per_V", "gamma_eo_pm_per_V", "vs_min_V", "vs_max_V", "veo_min_V", "veo_max_V",
                     "resonance_tolerance_nm"});
  auto& t = d.tuning;
  t.qd_wavelength0_nm = d.emitter.qd_wavelength_nm;
  t.cavity_wavelength0_nm = d.emitter.cavity_wavelength_nm;
  t.gamma_s_pm_per_V = tu.number_or("gamma_s_pm_per_V", t.gamma_s_pm_per_V);
  t.gamma_eo_pm_per_V = tu.number_or("gamma_eo_pm_per_V", t.gamma_eo_pm_per_V);
  t.vs_limits = {tu.number_or("vs_min_V", t.vs_limits.lo), tu.number_or("vs_max_V", t.vs_limits.hi)};
  t.veo_limits = {tu.number_or("veo_min_V", t.veo_limits.lo), tu.number_or("veo_max_V", t.veo_limits.hi)};
  t.resonance_tolerance_nm = tu.number_or("resonance_tolerance_nm", 0.1 * d.emitter.cavity_linewidth_nm);

  try {
    d.strain.validate();
    d.emitter.validate();
    t.validate();
    d.coupling().validate();
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, source + ": " + e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(kv::read_text_file(path), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Fleets and plans
//
//   [fleet]
//   objective = minimize_max_abs_voltage | maximize_margin   (optional)
//   [device]
//   name = ring-a
//   qd_wavelength_nm = 910.012
//   cavity_wavelength_nm = 909.954
//   gamma_s_pm_per_V = 0.57
//   gamma_eo_pm_per_V = 1.89
//   vs_min_V = -200
//   vs_max_V = 200
//   veo_min_V = -200
//   veo_max_V = 200
//   resonance_tolerance_nm = 0.00479     (optional)
//   [device]
//   ...

struct Fleet {
  std::vector<plan::DeviceTuningSpec> devices;
  plan::Objective objective = plan::Objective::minimize_max_abs_voltage;
};

inline plan::Objective parse_objective(std::string_view s) {
  if (s == "minimize_max_abs_voltage") return plan::Objective::minimize_max_abs_voltage;
  if (s == "maximize_margin") return plan::Objective::maximize_margin;
  fail(ErrorKind::ParseError, "unknown objective '" + std::string(s) +
                                  "' (expected minimize_max_abs_voltage or maximize_margin)");
}

inline Fleet parse_fleet(std::string_view text, const std::string& source = "<memory>") {
  const auto doc = kv::parse(text, source);
  doc.reject_unknown_sections({"fleet", "device"});
  Fleet f;
  if (const auto* fs = doc.find("fleet")) {
    fs->reject_unknown({"objective"});
    if (fs->has("objective")) {
      try {
        f.objective = parse_objective(fs->text("objective"));
      } catch (const Error& e) {
        fs->error_at(fs->entry("objective").line, e.what());
      }
    }
  }
  for (const auto* s : doc.all("device")) {
    s->reject_unknown({"name", "qd_wavelength_nm", "cavity_wavelength_nm", "gamma_s_pm_per_V", "gamma_eo_pm_per_V",
                       "vs_min_V", "vs_max_V", "veo_min_V", "veo_max_V", "resonance_tolerance_nm"});
    plan::DeviceTuningSpec d;
    d.name = s->text_or("name", "device" + std::to_string(f.devices.size() + 1));
    d.qd_wavelength0_nm = s->number("qd_wavelength_nm");
    d.cavity_wavelength0_nm = s->number("cavity_wavelength_nm");
    d.gamma_s_pm_per_V = s->number("gamma_s_pm_per_V");
    d.gamma_eo_pm_per_V = s->number("gamma_eo_pm_per_V");
    d.vs_limits = {s->number("vs_min_V"), s->number("vs_max_V")};
    d.veo_limits = {s->number("veo_min_V"), s->number("veo_max_V")};
    d.resonance_tolerance_nm = s->number_or("resonance_tolerance_nm", d.resonance_tolerance_nm);
    try {
      d.validate();
    } catch (const Error& e) {
      s->error_at(s->line, e.what());
    }
    f.devices.push_back(std::move(d));
  }
  if (f.devices.empty()) fail(ErrorKind::ParseError, source + ": fleet lists no [device] sections");
  return f;
}

inline Fleet load_fleet(const std::filesystem::path& path) { return parse_fleet(kv::read_text_file(path), path.string()); }

inline std::string format_fleet(const Fleet& f) {
  kv::Writer w;
  w.section("fleet").field("objective", plan::to_string(f.objective));
  for (const auto& d : f.devices) {
    w.section("device")
        .field("name", d.name)
        .field("qd_wavelength_nm", d.qd_wavelength0_nm)
        .field("cavity_wavelength_nm", d.cavity_wavelength0_nm)
        .field("gamma_s_pm_per_V", d.gamma_s_pm_per_V)
        .field("gamma_eo_pm_per_V", d.gamma_eo_pm_per_V)
        .field("vs_min_V", d.vs_limits.lo)
        .field("vs_max_V", d.vs_limits.hi)
        .field("veo_min_V", d.veo_limits.lo)
        .field("veo_max_V", d.veo_limits.hi)
        .field("resonance_tolerance_nm", d.resonance_tolerance_nm);
  }
  return w.str();
}

/// Plan text: one [plan] summary and one [device] block per device, numbers
/// with 12 significant digits.
inline std::string format_plan(const plan::AlignmentPlan& p) {
  auto num = [](double x) { return kv::format_double(x, csv_digits); };
  kv::Writer w;
  w.section("plan").field("objective", plan::to_string(p.objective_kind)).field("feasible", p.feasible);
  if (!p.feasible_interval.empty()) {
    w.field("feasible_lo_nm", num(p.feasible_interval.lo)).field("feasible_hi_nm", num(p.feasible_interval.hi));
  }
  if (p.feasible) {
    w.field("target_wavelength_nm", num(p.target_wavelength_nm))
        .field("max_abs_voltage_V", num(p.objective))
        .field("min_margin_V", num(p.min_margin_V));
  } else {
    w.field("diagnosis", plan::explain(p));
  }
  for (std::size_t i = 0; i < p.devices.size(); ++i) {
    const auto& dg = p.diagnosis[i];
    w.section("device").field("name", dg.name);
    if (p.feasible) w.field("vs_V", num(p.assignments[i].vs)).field("veo_V", num(p.assignments[i].veo));
    if (!dg.reach.empty()) w.field("reach_lo_nm", num(dg.reach.lo)).field("reach_hi_nm", num(dg.reach.hi));
    w.field("reach_lo_bound", dg.lower.describe()).field("reach_hi_bound", dg.upper.describe());
    if (!p.feasible) w.field("sets_fleet_lower", dg.sets_fleet_lower).field("sets_fleet_upper", dg.sets_fleet_upper);
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Fit reports

inline std::string format_fit_report(const lsq::FitReport& r) {
  kv::Writer w;
  w.section("fit")
      .field("model", r.model_id)
      .field("converged", r.converged)
      .field("termination", r.termination)
      .field("iterations", r.iterations)
      .field("residual_norm", r.residual_norm);
  w.section("parameters");
  for (const auto& [k, v] : r.parameters) w.field(k, v);
  w.section("standard_errors");
  for (const auto& [k, v] : r.standard_errors) w.field(k, v);
  if (!r.labels.empty()) {
    w.section("labels");
    for (const auto& [k, v] : r.labels) w.field(k, v);
  }
  return w.str();
}

inline lsq::FitReport parse_fit_report(std::string_view text, const std::string& source = "<memory>") {
  const auto doc = kv::parse(text, source);
  doc.reject_unknown_sections({"fit", "parameters", "standard_errors", "labels"});
  lsq::FitReport r;
  const auto& fit = doc.section("fit");
  fit.reject_unknown({"model", "converged", "termination", "iterations", "residual_norm"});
  r.model_id = fit.text("model");
  r.converged = fit.boolean("converged");
  r.termination = fit.text("termination");
  r.iterations = static_cast<int>(fit.integer("iterations"));
  r.residual_norm = fit.number("residual_norm");
  for (const auto& e : doc.section("parameters").entries) r.parameters[e.key] = doc.section("parameters").number(e.key);
  if (const auto* s = doc.find("standard_errors"))
    for (const auto& e : s->entries) r.standard_errors[e.key] = s->number(e.key);
  if (const auto* s = doc.find("labels"))
    for (const auto& e : s->entries) r.labels[e.key] = e.value;
  return r;
}

// ---------------------------------------------------------------------------
// Manifests

struct Manifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // file name, content hash
  std::vector<std::string> outputs;
};

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

/// No timestamps or host data: identical runs give identical manifests.
inline std::string format_manifest(const Manifest& m) {
  kv::Writer w;
  w.section("manifest")
      .field("tool", "ringqed")
      .field("version", std::string(version))
      .field("command", m.command)
      .field("config_hash", "fnv1a64:" + hex64(m.config_hash))
      .field("seed", m.seed ? std::to_string(*m.seed) : std::string("none"))
      .field("noise_algorithm", std::string(noise::algorithm_id));
  for (std::size_t i = 0; i < m.inputs.size(); ++i)
    w.field("input" + std::to_string(i + 1), m.inputs[i].first + " fnv1a64:" + hex64(m.inputs[i].second));
  for (std::size_t i = 0; i < m.outputs.size(); ++i) w.field("output" + std::to_string(i + 1), m.outputs[i]);
  return w.str();
}

}  // namespace ringqed::io
