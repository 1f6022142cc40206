// nvloc: simulate NV sensor coherence under CPMG control, build (R, theta)
// fingerprint libraries, and invert multi-sensor coherence dips into a 3D
// position estimate for a remote electron spin.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "nvloc/io.hpp"

namespace fs = std::filesystem;
using namespace nvloc;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = default_threads();
  std::optional<std::string> engine;
  bool force = false;
  bool export_csv = false;
  std::vector<std::string> curve_paths;
  std::vector<std::string> lib_paths;
};

void print_warnings(const WarningLog& log) {
  for (const std::string& w : log.items) std::cerr << "warning: " << w << "\n";
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

std::vector<double> resolve_time_grid(const RunConfig& cfg,
                                      const SensorConfig& sensor,
                                      WarningLog* log) {
  const TimeGridSpec& tg = cfg.time_grid;
  if (!tg.automatic) return linspace(tg.min_us, tg.max_us, tg.points);
  const int pulses = cfg.sequence.effective_pulses();
  double t_pred = 0.0;
  const double omega_nv = nv_larmor(sensor, cfg.field);
  const double lambda = renormalization_factor(sensor.strain, omega_nv);
  if (cfg.target) {
    const NoiseSource src =
        target_noise_source(sensor, cfg.field, *cfg.target);
    t_pred = dip_time(pulses, 1, src.omega, lambda, src.a_parallel);
  } else if (cfg.include_bystanders && cfg.sensors.size() > 1) {
    for (const SensorConfig& other : cfg.sensors) {
      if (other.id == sensor.id) continue;
      const EffectiveBystander b =
          effective_bystander_spin(sensor, other, cfg.field, log);
      t_pred = dip_time(pulses, 1, b.source.omega, lambda,
                        b.source.a_parallel);
      break;
    }
  } else {
    return linspace(1.0, 100.0, tg.points);
  }
  return linspace(tg.window_lo * t_pred, tg.window_hi * t_pred, tg.points);
}

Scenario make_scenario(const RunConfig& cfg, std::size_t sensor_index) {
  Scenario sc;
  sc.sensor = cfg.sensors[sensor_index];
  sc.field = cfg.field;
  sc.target = cfg.target;
  sc.quadratic = cfg.quadratic;
  if (cfg.include_bystanders)
    for (std::size_t s = 0; s < cfg.sensors.size(); ++s)
      if (s != sensor_index) sc.bystanders.push_back(cfg.sensors[s]);
  sc.descriptor = "sensor " + sc.sensor.id;
  return sc;
}

std::string trim_number(double v) {
  std::string s = std::to_string(v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

int cmd_simulate(const RunConfig& cfg_in, const Options& opt) {
  RunConfig cfg = cfg_in;
  if (opt.engine)
    cfg.engine = detail::parse_engine(*opt.engine, "--engine");
  fs::create_directories(opt.out_dir);
  WarningLog log;

  std::vector<std::pair<std::string, RunConfig>> runs;
  if (cfg.sweep) {
    for (double v : cfg.sweep->values) {
      RunConfig c = cfg;
      auto [r, theta] = *c.target_polar;
      if (c.sweep->parameter == "r_nm")
        r = v;
      else
        theta = rad_from_deg(v);
      c.target_polar = {r, theta};
      const SensorConfig& s0 = c.sensors.front();
      const Vec3 axis = s0.axis.normalized();
      const Vec3 helper =
          std::abs(axis.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
      const Vec3 e1 = axis.cross(helper).normalized();
      c.target->position_nm =
          s0.position_nm +
          r * (std::sin(theta) * e1 + std::cos(theta) * axis);
      const std::string tag = (c.sweep->parameter == "r_nm" ? "_r" : "_theta") +
                              trim_number(v);
      runs.emplace_back(tag, c);
    }
  } else {
    runs.emplace_back("", cfg);
  }

  for (const auto& [tag, run] : runs) {
    for (std::size_t s = 0; s < run.sensors.size(); ++s) {
      const Scenario sc = make_scenario(run, s);
      const std::vector<double> grid =
          resolve_time_grid(run, run.sensors[s], &log);
      CurveFile cf;
      cf.curve = coherence_curve(sc, run.sequence.effective_pulses(), grid,
                                 run.engine, opt.threads, &log);
      if (run.bath) {
        // independent environments factorize: L = L_target * L_bath
        BathParams params;
        params.seed =
            run.bath->seeds.empty() ? run.seed : run.bath->seeds.front();
        params.abundance = run.bath->abundance;
        params.cutoff_nm = run.bath->cutoff_nm;
        const BathRealization bath =
            generate_bath(params, run.sensors[s], run.field);
        cf.curve = combine_curves(
            cf.curve, cce2_coherence(bath, run.sequence.effective_pulses(),
                                     grid, opt.threads, nullptr, &log));
      }
      cf.sensor_id = run.sensors[s].id;
      cf.engine = engine_name(run.engine);
      cf.family = run.sequence.family;
      cf.pulses = run.sequence.effective_pulses();
      cf.config_hash = run.config_hash;
      cf.control_hash = control_hash(run, s);
      const fs::path base =
          fs::path(opt.out_dir) / ("curve_" + cf.sensor_id + tag);
      write_curve_csv(base.string() + ".csv", cf);
      write_curve_json(base.string() + ".json", cf);
      std::cout << "simulate: sensor " << cf.sensor_id << tag << " ("
                << engine_name(run.engine) << ", " << grid.size()
                << " samples) -> " << base.string() << ".{csv,json}\n";
    }
  }
  print_warnings(log);
  return 0;
}

int cmd_library(const RunConfig& cfg, const Options& opt) {
  fs::create_directories(opt.out_dir);
  for (std::size_t s = 0; s < cfg.sensors.size(); ++s) {
    const fs::path path =
        fs::path(opt.out_dir) / ("library_" + cfg.sensors[s].id + ".fpl");
    if (fs::exists(path) && !opt.force)
      throw GuardRefusal(path.string() +
                         " exists; pass --force to overwrite");
    LibraryControl ctl;
    ctl.pulses = cfg.sequence.effective_pulses();
    ctl.field_gauss = cfg.field.magnitude_gauss;
    ctl.strain_mhz = cfg.sensor_strain_mhz[s];
    ctl.gamma_nv_mhz = cfg.gamma_nv_mhz;
    ctl.gamma_e_mhz = cfg.gamma_e_mhz;
    ctl.engine = cfg.library.engine;
    ctl.refine_points = cfg.library.refine_points;
    ctl.dip_threshold = cfg.library.dip_threshold;
    const auto start = std::chrono::steady_clock::now();
    FingerprintLibrary lib =
        build_library(cfg.grid, ctl, cfg.sensors[s].id, opt.threads,
                      cfg.library.spot_fraction, cfg.seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    lib.config_hash = cfg.config_hash;
    lib.control_hash = control_hash(cfg, s);
    write_library(path, lib);
    std::cout << "library: sensor " << lib.sensor_id << ", "
              << lib.cells.size() << " cells, engine "
              << engine_name(ctl.engine) << ", " << secs << " s -> "
              << path.string() << "\n";
    if (lib.spot_checked > 0)
      std::cout << "  spot check vs exact engine (" << lib.spot_checked
                << " cells): max dt/t " << lib.spot_max_dt_rel
                << ", max ddepth " << lib.spot_max_ddepth << "\n";
    if (opt.export_csv) {
      const fs::path csv =
          fs::path(opt.out_dir) / ("library_" + cfg.sensors[s].id + ".csv");
      write_library_csv(csv, lib);
      std::cout << "  exported " << csv.string() << "\n";
    }
  }
  return 0;
}

std::string control_spec_text(const LibraryControl& c) {
  return "pulses=" + std::to_string(c.pulses) +
         " B=" + format_double(c.field_gauss) +
         " G strain=" + format_double(c.strain_mhz) +
         " MHz gamma_nv=" + format_double(c.gamma_nv_mhz) +
         " gamma_e=" + format_double(c.gamma_e_mhz);
}

int cmd_locate(const RunConfig& cfg, const Options& opt) {
  fs::create_directories(opt.out_dir);
  std::vector<FingerprintLibrary> libs;
  std::vector<CoherenceCurve> curves;
  for (std::size_t s = 0; s < cfg.sensors.size(); ++s) {
    const std::string lib_path =
        s < opt.lib_paths.size()
            ? opt.lib_paths[s]
            : (fs::path(opt.out_dir) / ("library_" + cfg.sensors[s].id +
                                        ".fpl"))
                  .string();
    FingerprintLibrary lib = read_library(lib_path);
    const std::uint64_t expect = control_hash(cfg, s);
    if (lib.control_hash != expect)
      throw GuardRefusal(
          "library " + lib_path + " control spec does not match the config\n"
          "  library: " + control_spec_text(lib.control) +
          " (hash " + hex64(lib.control_hash) + ")\n  config:  pulses=" +
          std::to_string(cfg.sequence.effective_pulses()) +
          " B=" + format_double(cfg.field.magnitude_gauss) +
          " G strain=" + format_double(cfg.sensor_strain_mhz[s]) +
          " MHz gamma_nv=" + format_double(cfg.gamma_nv_mhz) +
          " gamma_e=" + format_double(cfg.gamma_e_mhz) + " (hash " +
          hex64(expect) + ")");

    const std::string curve_path =
        s < opt.curve_paths.size()
            ? opt.curve_paths[s]
            : (fs::path(opt.out_dir) / ("curve_" + cfg.sensors[s].id +
                                        ".json"))
                  .string();
    CurveFile cf;
    if (fs::path(curve_path).extension() == ".csv") {
      cf = read_curve_csv(curve_path);
      std::cerr << "warning: " << curve_path
                << " is plain CSV; control spec cannot be verified\n";
    } else {
      cf = read_curve_json(curve_path);
      if (cf.control_hash != lib.control_hash)
        throw GuardRefusal("curve " + curve_path + " (control hash " +
                           hex64(cf.control_hash) +
                           ") does not match library " + lib_path +
                           " (control hash " + hex64(lib.control_hash) + ")");
    }
    libs.push_back(std::move(lib));
    curves.push_back(std::move(cf.curve));
  }

  const LocateResult res =
      locate(curves, libs, cfg.sensors, cfg.match.tol_time_rel,
             cfg.match.tol_depth, cfg.intersect.voxel_nm,
             cfg.library.dip_threshold, opt.threads);

  const fs::path out_path = fs::path(opt.out_dir) / "estimate.json";
  std::ofstream out(out_path);
  out << estimate_json(res, cfg.sensors, cfg.config_hash).dump(2) << "\n";
  out.close();

  for (std::size_t s = 0; s < cfg.sensors.size(); ++s) {
    std::cout << "sensor " << cfg.sensors[s].id << ": ";
    if (res.features[s])
      std::cout << "dip t=" << res.features[s]->t_dip_us
                << " us depth=" << res.features[s]->depth;
    else
      std::cout << "no dip";
    std::cout << ", " << res.matches[s].matched_cells << " cells";
    for (const MatchInterval& box : res.matches[s].intervals)
      std::cout << "  R[" << box.r_lo << "," << box.r_hi << "] theta["
                << deg_from_rad(box.theta_lo) << ","
                << deg_from_rad(box.theta_hi) << "]";
    std::cout << "\n";
  }
  if (res.estimate.regions.empty()) {
    std::cout << "no consistent region: " << res.estimate.diagnostics << "\n";
  } else {
    for (const Region& r : res.estimate.regions)
      std::cout << "region: centroid (" << r.centroid_nm.x() << ", "
                << r.centroid_nm.y() << ", " << r.centroid_nm.z()
                << ") nm, resolution " << r.resolution_nm << " nm"
                << (r.mirror_branch ? " [mirror branch]" : "") << "\n";
    std::cout << "resolution: " << res.estimate.resolution_nm << " nm\n";
  }
  for (const std::string& f : res.estimate.flags)
    std::cout << "flag: " << f << "\n";
  std::cout << "estimate -> " << out_path.string() << "\n";
  return 0;
}

int cmd_bath(const RunConfig& cfg, const Options& opt) {
  if (!cfg.bath) throw ConfigError("bath command requires a 'bath' section");
  fs::create_directories(opt.out_dir);
  const BathSpecConfig& spec = *cfg.bath;
  std::vector<std::uint64_t> seeds = spec.seeds;
  if (seeds.empty()) seeds.push_back(cfg.seed);
  const std::vector<double> grid =
      linspace(spec.grid.min_us, spec.grid.max_us, spec.grid.points);
  WarningLog log;
  std::vector<double> mean(grid.size(), 0.0);
  for (std::uint64_t seed : seeds) {
    BathParams params;
    params.seed = seed;
    params.abundance = spec.abundance;
    params.cutoff_nm = spec.cutoff_nm;
    const BathRealization bath =
        generate_bath(params, cfg.sensors.front(), cfg.field);
    BathCurveMeta meta;
    CurveFile cf;
    cf.curve = cce2_coherence(bath, cfg.sequence.effective_pulses(), grid,
                              opt.threads, &meta, &log);
    cf.sensor_id = cfg.sensors.front().id;
    cf.engine = "cce2";
    cf.family = cfg.sequence.family;
    cf.pulses = cfg.sequence.effective_pulses();
    cf.config_hash = cfg.config_hash;
    cf.control_hash = control_hash(cfg, 0);
    const std::string tag = "_seed" + std::to_string(seed);
    write_curve_csv(fs::path(opt.out_dir) / ("bath_curve" + tag + ".csv"),
                    cf);
    write_bath_json(
        fs::path(opt.out_dir) / ("bath_realization" + tag + ".json"), bath,
        &meta, cfg.config_hash);
    for (std::size_t i = 0; i < grid.size(); ++i)
      mean[i] += cf.curve.values[i] / double(seeds.size());
    const double lo =
        *std::min_element(cf.curve.values.begin(), cf.curve.values.end());
    std::cout << "bath: seed " << seed << ", " << meta.spin_count
              << " spins, " << meta.pair_count << " pairs, min L = " << lo
              << ", pair-truncation deviation " << meta.convergence_deviation
              << "\n";
  }
  if (seeds.size() > 1) {
    CurveFile cf;
    cf.curve.times_us = grid;
    cf.curve.values = mean;
    cf.sensor_id = cfg.sensors.front().id;
    cf.engine = "cce2-mean";
    cf.family = cfg.sequence.family;
    cf.pulses = cfg.sequence.effective_pulses();
    cf.config_hash = cfg.config_hash;
    cf.control_hash = control_hash(cfg, 0);
    write_curve_csv(fs::path(opt.out_dir) / "bath_curve_mean.csv", cf);
    std::cout << "bath: seed-averaged min L = "
              << *std::min_element(mean.begin(), mean.end()) << " over "
              << seeds.size() << " seeds\n";
  }
  print_warnings(log);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "nvloc: multi-sensor NV spin coherence simulation and single-spin "
      "positioning"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run configuration (JSON)")
        ->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "override the configured seed");
    sub->add_option("--threads", opt.threads, "worker thread cap");
  };

  CLI::App* simulate =
      app.add_subcommand("simulate", "coherence curves per sensor");
  add_common(simulate);
  simulate->add_option("--engine", opt.engine,
                       "override engine: magnus|exact|semiclassical");

  CLI::App* library =
      app.add_subcommand("library", "build fingerprint libraries");
  add_common(library);
  library->add_flag("--force", opt.force, "overwrite existing library files");
  library->add_flag("--export-csv", opt.export_csv,
                    "also export libraries as CSV");

  CLI::App* locate_cmd =
      app.add_subcommand("locate", "match curves and intersect sensors");
  add_common(locate_cmd);
  locate_cmd->add_option("--curve", opt.curve_paths,
                         "curve file per sensor (json or csv)");
  locate_cmd->add_option("--lib", opt.lib_paths, "library file per sensor");

  CLI::App* bath =
      app.add_subcommand("bath", "nuclear-bath decoherence (CCE-2)");
  add_common(bath);

  CLI11_PARSE(app, argc, argv);
  if (opt.threads < 1) opt.threads = 1;

  try {
    RunConfig cfg = load_config(opt.config_path);
    if (opt.seed) {
      cfg.seed = *opt.seed;
      // the seed is part of the physics; fold the override into the hash
      cfg.config_hash = fnv1a(hex64(cfg.config_hash) +
                              ";seed=" + std::to_string(*opt.seed));
    }
    if (simulate->parsed()) return cmd_simulate(cfg, opt);
    if (library->parsed()) return cmd_library(cfg, opt);
    if (locate_cmd->parsed()) return cmd_locate(cfg, opt);
    if (bath->parsed()) return cmd_bath(cfg, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const GuardRefusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitGuardRefusal;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalError;
  }
  return 0;
}
