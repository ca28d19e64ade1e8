#pragma once

// Command-line front end. cli_dispatch() returns the process exit code:
// 0 success, 1 usage error, 2 data or model error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ringqed/cqed.hpp"
#include "ringqed/fitting.hpp"
#include "ringqed/io.hpp"
#include "ringqed/materials.hpp"
#include "ringqed/noise.hpp"
#include "ringqed/planner.hpp"
#include "ringqed/resonator.hpp"
#include "ringqed/strain.hpp"

#ifndef RINGQED_DATA_DIR
#define RINGQED_DATA_DIR "data"
#endif

namespace ringqed::cli {

namespace fs = std::filesystem;

inline constexpr const char* output_dir_env = "RINGQED_OUTPUT_DIR";

struct Common {
  std::string config;
  std::string out;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
};

struct Context {
  std::string command;
  std::vector<std::string> arguments;
  io::RunConfig config;
  std::optional<fs::path> config_dir_override;
  std::ostream* out = &std::cout;
  io::Manifest manifest;

  void load(const Common& c) {
    if (!c.config.empty()) {
      config = io::load_run_config(c.config);
      manifest.config_hash = kv::fnv1a64(config.text);
    } else {
      manifest.config_hash = kv::fnv1a64("");
    }
    if (c.seed) config.seed = *c.seed;
    if (!c.output_dir.empty()) config_dir_override = fs::path(c.output_dir);
    manifest.command = command;
  }

  fs::path output_path(const Common& c, const std::string& default_name) const {
    fs::path base = ".";
    if (config_dir_override) {
      base = *config_dir_override;
    } else if (config.output_dir) {
      base = *config.output_dir;
    } else if (const char* env = std::getenv(output_dir_env); env && *env) {
      base = env;
    }
    const fs::path name = c.out.empty() ? fs::path(default_name) : fs::path(c.out);
    return name.is_absolute() ? name : base / name;
  }

  std::string read_input(const std::string& path) {
    auto text = kv::read_text_file(path);
    manifest.inputs.emplace_back(fs::path(path).filename().string(), kv::fnv1a64(text));
    return text;
  }

  MaterialSet materials() const {
    const fs::path db = config.materials_db.empty() ? fs::path(RINGQED_DATA_DIR) / "materials.db" : config.materials_db;
    return load_material_database(db);
  }

  /// Writes `content` atomically plus its manifest next to it.
  void emit(const fs::path& path, const std::string& content, bool uses_seed) {
    kv::write_file_atomic(path, content);
    manifest.seed = uses_seed ? std::optional<std::uint64_t>(config.seed) : std::nullopt;
    manifest.outputs = {path.filename().string()};
    auto m = manifest;
    std::string args;
    for (const auto& a : arguments) args += (args.empty() ? "" : " ") + a;
    auto text = io::format_manifest(m);
    text += "arguments_hash = fnv1a64:" + io::hex64(kv::fnv1a64(args)) + "\n";
    auto mpath = path;
    mpath += ".manifest";
    kv::write_file_atomic(mpath, text);
    *out << "wrote " << path.string() << '\n';
  }
};

inline void add_common(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--config", c.config, "run configuration (key/value text)")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output file (relative paths resolve against the output directory)");
  sub->add_option("--output-dir", c.output_dir,
                  std::string("output directory (default: config [run] output_dir, then $") + output_dir_env + ")");
  if (with_seed) sub->add_option("--seed", c.seed, "noise seed (overrides config [run] seed)");
}

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"ringqed: hybrid ring-resonator cavity-QED simulator and fitter", "ringqed"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::version));

  Context ctx;
  ctx.out = &out;
  for (int i = 1; i < argc; ++i) ctx.arguments.emplace_back(argv[i]);
  std::function<void()> run;

  // simulate-transmission
  Common c_tr;
  double tr_start = 0, tr_stop = 0, tr_noise = 0;
  std::size_t tr_points = 6001;
  unsigned tr_threads = 1;
  auto* tr = app.add_subcommand("simulate-transmission", "all-pass ring transmission spectrum (CSV)");
  add_common(tr, c_tr, true);
  tr->add_option("--start-nm", tr_start, "first wavelength (default: design wavelength - 1.5 FSR)");
  tr->add_option("--stop-nm", tr_stop, "last wavelength (default: design wavelength + 1.5 FSR)");
  tr->add_option("--points", tr_points, "sample count")->check(CLI::Range(2, 100000000));
  tr->add_option("--noise", tr_noise, "additive Gaussian noise sigma on transmission")->check(CLI::NonNegativeNumber);
  tr->add_option("--threads", tr_threads, "worker threads")->check(CLI::Range(1, 256));
  tr->callback([&] {
    run = [&] {
      ctx.load(c_tr);
      const auto& d = ctx.config.device;
      const double fsr = resonator::free_spectral_range(d.ring) / units::nm;
      const double centre = d.ring.design_wavelength_m / units::nm;
      const double lo = tr->count("--start-nm") ? tr_start : centre - 1.5 * fsr;
      const double hi = tr->count("--stop-nm") ? tr_stop : centre + 1.5 * fsr;
      require(hi > lo, ErrorKind::DomainError, "--stop-nm must exceed --start-nm");
      std::vector<double> grid(tr_points);
      for (std::size_t i = 0; i < tr_points; ++i)
        grid[i] = (lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(tr_points - 1)) * units::nm;
      auto s = resonator::transmission_spectrum(d.coupling(), d.ring, grid, tr_threads);
      if (tr_noise > 0) {
        noise::CountNoise rng(ctx.config.seed);
        for (auto& v : s.values) v += tr_noise * rng.normal();
      }
      ctx.emit(ctx.output_path(c_tr, "transmission.csv"), io::format_spectrum(s), tr_noise > 0);
    };
  });

  // simulate-tuning
  Common c_tu;
  double tu_vmin = 0, tu_vmax = 0, tu_noise = 0;
  std::size_t tu_points = 33;
  bool tu_suspended = false;
  auto* tu = app.add_subcommand("simulate-tuning", "strain-tuned emission wavelength versus voltage (CSV)");
  add_common(tu, c_tu, true);
  tu->add_option("--vmin", tu_vmin, "first voltage (default: device limit)");
  tu->add_option("--vmax", tu_vmax, "last voltage (default: device limit)");
  tu->add_option("--points", tu_points, "sample count")->check(CLI::Range(2, 1000000));
  tu->add_option("--noise-pm", tu_noise, "Gaussian wavelength noise sigma, pm")->check(CLI::NonNegativeNumber);
  tu->add_flag("--suspended", tu_suspended, "suspended membrane (overrides config)");
  tu->callback([&] {
    run = [&] {
      ctx.load(c_tu);
      auto dev = ctx.config.device.strain;
      if (tu_suspended) dev.suspended = true;
      const double lo = tu->count("--vmin") ? tu_vmin : dev.v_min_V;
      const double hi = tu->count("--vmax") ? tu_vmax : dev.v_max_V;
      std::vector<double> v(tu_points);
      for (std::size_t i = 0; i < tu_points; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(tu_points - 1);
      const auto curve = strain::tuning_curve(dev, ctx.materials(), v);
      io::TuningSweep sweep;
      noise::CountNoise rng(ctx.config.seed);
      for (const auto& p : curve) {
        sweep.voltage_V.push_back(p.voltage_V);
        sweep.wavelength_nm.push_back(p.wavelength_m / units::nm + (tu_noise > 0 ? 1e-3 * tu_noise * rng.normal() : 0.0));
      }
      ctx.emit(ctx.output_path(c_tu, "tuning.csv"), io::format_tuning_sweep(sweep), tu_noise > 0);
    };
  });

  // simulate-decay
  Common c_de;
  double de_detuning = 0, de_bin = 0.02, de_range = 12.0, de_total = 1e5, de_t0 = 1.0;
  bool de_noiseless = false;
  auto* de = app.add_subcommand("simulate-decay", "IRF-broadened emitter decay histogram (CSV)");
  add_common(de, c_de, true);
  de->add_option("--detuning-nm", de_detuning, "emitter minus cavity wavelength");
  de->add_option("--bin-width-ns", de_bin, "histogram bin width")->check(CLI::PositiveNumber);
  de->add_option("--range-ns", de_range, "histogram span starting at 0")->check(CLI::PositiveNumber);
  de->add_option("--total-counts", de_total, "expected counts in the full decay")->check(CLI::NonNegativeNumber);
  de->add_option("--t0-ns", de_t0, "excitation time");
  de->add_flag("--noiseless", de_noiseless, "skip Poisson noise");
  de->callback([&] {
    run = [&] {
      ctx.load(c_de);
      const auto& d = ctx.config.device;
      const auto bins = static_cast<std::size_t>(std::llround(de_range / de_bin));
      require(bins >= 3, ErrorKind::DomainError, "range holds fewer than 3 bins");
      const double rate = cqed::rate_at_detuning(d.emitter, de_detuning);
      auto h = cqed::synthesize_decay(d.emitter, de_detuning, d.irf_sigma_ns(), uniform_edges(0.0, de_range, bins),
                                      de_total * rate, de_noiseless ? std::nullopt : std::optional(ctx.config.seed),
                                      de_t0);
      ctx.emit(ctx.output_path(c_de, "decay.csv"), io::format_histogram(h), !de_noiseless);
    };
  });

  // simulate-g2
  Common c_g2;
  cqed::G2Synthesis g2p{0.012, 0.5, 12.5, 4, 1e5, 0.05};
  bool g2_noiseless = false;
  auto* g2 = app.add_subcommand("simulate-g2", "pulsed second-order correlation histogram (CSV)");
  add_common(g2, c_g2, true);
  g2->add_option("--g2", g2p.g2_zero, "central peak area over side peak area")->check(CLI::Range(0.0, 1.0));
  g2->add_option("--lifetime-ns", g2p.lifetime_ns, "emitter lifetime")->check(CLI::PositiveNumber);
  g2->add_option("--period-ns", g2p.repetition_ns, "excitation repetition period")->check(CLI::PositiveNumber);
  g2->add_option("--side-peaks", g2p.side_peaks, "peaks recorded on each side")->check(CLI::Range(1, 1000));
  g2->add_option("--peak-area", g2p.peak_area, "counts per side peak")->check(CLI::NonNegativeNumber);
  g2->add_option("--bin-width-ns", g2p.bin_width_ns, "histogram bin width")->check(CLI::PositiveNumber);
  g2->add_flag("--noiseless", g2_noiseless, "skip Poisson noise");
  g2->callback([&] {
    run = [&] {
      ctx.load(c_g2);
      const auto h = cqed::synthesize_g2(g2p, g2_noiseless ? std::nullopt : std::optional(ctx.config.seed));
      ctx.emit(ctx.output_path(c_g2, "g2.csv"), io::format_histogram(h), !g2_noiseless);
    };
  });

  // fitters
  auto add_fit = [&](const char* name, const char* help, Common& c, std::string& in, int* starts) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, c, false);
    sub->add_option("--in", in, "input file")->required()->check(CLI::ExistingFile);
    if (starts) sub->add_option("--starts", *starts, "multi-start count")->check(CLI::Range(1, 64));
    return sub;
  };
  auto report = [&](const Common& c, const char* default_name, const lsq::FitReport& r) {
    const auto text = io::format_fit_report(r);
    out << text;
    ctx.emit(ctx.output_path(c, default_name), text, false);
  };

  Common c_fr;
  std::string fr_in;
  int fr_starts = 1;
  auto* fr = add_fit("fit-resonance", "Lorentzian fits of every resonance dip; Q, extinction, FSR", c_fr, fr_in,
                     &fr_starts);
  fr->callback([&] {
    run = [&] {
      ctx.load(c_fr);
      const auto s = io::parse_spectrum(ctx.read_input(fr_in), fr_in);
      fit::FitOptions opt;
      opt.starts = fr_starts;
      report(c_fr, "resonance.report", fit::fit_resonance(s, opt).summary);
    };
  });

  Common c_fd;
  std::string fd_in;
  int fd_starts = 1;
  auto* fd = add_fit("fit-decay", "IRF-deconvolved single-exponential decay fit", c_fd, fd_in, &fd_starts);
  fd->callback([&] {
    run = [&] {
      ctx.load(c_fd);
      const auto h = io::parse_decay_histogram(ctx.read_input(fd_in), fd_in);
      fit::FitOptions opt;
      opt.starts = fd_starts;
      report(c_fd, "decay.report", fit::fit_decay(h, opt));
    };
  });

  Common c_fra;
  std::string fra_in;
  auto* fra = add_fit("fit-rate", "tuning slope with linear/quadratic model selection", c_fra, fra_in, nullptr);
  fra->callback([&] {
    run = [&] {
      ctx.load(c_fra);
      const auto s = io::parse_tuning_sweep(ctx.read_input(fra_in), fra_in);
      report(c_fra, "rate.report", fit::fit_tuning_rate(s.voltage_V, s.wavelength_nm));
    };
  });

  Common c_fg;
  std::string fg_in;
  int fg_starts = 1;
  auto* fg = add_fit("fit-g2", "g2(0) from double-Gaussian peak areas", c_fg, fg_in, &fg_starts);
  fg->callback([&] {
    run = [&] {
      ctx.load(c_fg);
      const auto h = io::parse_correlation_histogram(ctx.read_input(fg_in), fg_in);
      fit::FitOptions opt;
      opt.starts = fg_starts;
      report(c_fg, "g2.report", fit::fit_g2_purity(h, opt));
    };
  });

  // plan
  Common c_pl;
  std::string pl_fleet, pl_objective;
  auto* pl = app.add_subcommand("plan", "common-wavelength voltage plan for a device fleet");
  add_common(pl, c_pl, false);
  pl->add_option("--fleet", pl_fleet, "fleet file ([device] sections)")->required()->check(CLI::ExistingFile);
  pl->add_option("--objective", pl_objective, "minimize_max_abs_voltage or maximize_margin")
      ->check(CLI::IsMember({"minimize_max_abs_voltage", "maximize_margin"}));
  pl->callback([&] {
    run = [&] {
      ctx.load(c_pl);
      const auto fleet = io::parse_fleet(ctx.read_input(pl_fleet), pl_fleet);
      const auto objective = pl_objective.empty() ? fleet.objective : io::parse_objective(pl_objective);
      const auto text = io::format_plan(plan::plan_alignment(fleet.devices, objective));
      out << text;
      ctx.emit(ctx.output_path(c_pl, "plan.txt"), text, false);
    };
  });

  // mode-volume
  Common c_mv;
  std::string mv_in;
  double mv_wavelength = 0, mv_index = 0;
  auto* mv = app.add_subcommand("mode-volume", "effective mode volume and Purcell ceiling of a sampled mode");
  add_common(mv, c_mv, false);
  mv->add_option("--in", mv_in, "mode field file")->required()->check(CLI::ExistingFile);
  mv->add_option("--wavelength-nm", mv_wavelength, "normalization wavelength (default: file, then config)")
      ->check(CLI::PositiveNumber);
  mv->add_option("--index", mv_index, "normalization refractive index (default: file)")->check(CLI::PositiveNumber);
  mv->callback([&] {
    run = [&] {
      ctx.load(c_mv);
      const auto m = io::parse_mode_field(ctx.read_input(mv_in), mv_in);
      const double lambda = mv->count("--wavelength-nm")
                                ? mv_wavelength
                                : m.wavelength_nm.value_or(ctx.config.device.ring.design_wavelength_m / units::nm);
      if (!mv->count("--index") && !m.refractive_index)
        fail(ErrorKind::DomainError, "refractive index missing: pass --index or set refractive_index in the file");
      const double n = mv->count("--index") ? mv_index : *m.refractive_index;
      const auto v = resonator::effective_mode_volume(m.field, lambda * units::nm, n);
      const double q = ctx.config.device.quality();
      lsq::FitReport r;
      r.model_id = "mode_volume";
      r.converged = true;
      r.termination = "closed_form";
      r.parameters = {{"volume_m3", v.volume_m3},
                      {"volume_norm", v.normalized},
                      {"quality_factor", q},
                      {"max_purcell", resonator::max_purcell(q, v.normalized)}};
      report(c_mv, "mode_volume.report", r);
    };
  });

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << io::version << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    ctx.command = app.get_subcommands().front()->get_name();
    run();
    return 0;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ringqed::cli
