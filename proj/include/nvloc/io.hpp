#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvloc/bath.hpp"
#include "nvloc/coherence.hpp"
#include "nvloc/positioning.hpp"

namespace nvloc {

using Json = nlohmann::ordered_json;

// Error classes map onto distinct process exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GuardRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitConfigError = 2;
inline constexpr int kExitGuardRefusal = 3;
inline constexpr int kExitNumericalError = 4;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Formatting and hashing
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct TimeGridSpec {
  bool automatic = true;
  double min_us = 0.0, max_us = 0.0;
  int points = 2000;
  double window_lo = 0.5, window_hi = 1.5;
};

struct SequenceSpec {
  std::string family = "cpmg";  // cpmg | xy8 (CPMG-8k alias)
  int pulses = 30;
  int effective_pulses() const {
    return family == "xy8" ? 8 * pulses : pulses;
  }
};

struct MatchSpec {
  double tol_time_rel = 0.0008;
  double tol_depth = 0.01;
};

struct IntersectSpec {
  double voxel_nm = 0.05;
};

struct LibrarySpec {
  Engine engine = Engine::Exact;
  int refine_points = 600;
  double spot_fraction = 0.01;
  double dip_threshold = 0.99;
};

struct BathSpecConfig {
  double abundance = kNaturalAbundanceC13;
  double cutoff_nm = 8.0;
  std::vector<std::uint64_t> seeds;  // empty: use the run seed
  TimeGridSpec grid{false, 20.0, 1000.0, 50, 0.5, 1.5};
};

struct SweepSpec {
  std::string parameter;  // r_nm | theta_deg, relative to the first sensor
  std::vector<double> values;
};

struct RunConfig {
  std::uint64_t seed = 1;
  double gamma_nv_mhz = kGammaNvMhzPerG;
  double gamma_e_mhz = kGammaNvMhzPerG;
  FieldConfig field;
  std::vector<SensorConfig> sensors;
  std::vector<double> sensor_strain_mhz;  // raw values as configured
  std::optional<TargetSpec> target;
  std::optional<std::pair<double, double>> target_polar;  // (r_nm, theta_rad)
  SequenceSpec sequence;
  TimeGridSpec time_grid;
  Engine engine = Engine::Exact;
  bool include_bystanders = false;
  bool quadratic = false;
  LibraryGrid grid;
  MatchSpec match;
  IntersectSpec intersect;
  LibrarySpec library;
  std::optional<BathSpecConfig> bath;
  std::optional<SweepSpec> sweep;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline void require_keys(const Json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline double get_number(const Json& obj, const std::string& where,
                         const char* key, std::optional<double> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing key '" + std::string(key) + "'");
  }
  if (!obj[key].is_number())
    throw ConfigError(where + ": '" + key + "' must be a number");
  return obj[key].get<double>();
}

inline Vec3 get_vec3(const Json& obj, const std::string& where,
                     const char* key) {
  if (!obj.contains(key) || !obj[key].is_array() || obj[key].size() != 3)
    throw ConfigError(where + ": '" + std::string(key) +
                      "' must be a 3-element array");
  return Vec3(obj[key][0].get<double>(), obj[key][1].get<double>(),
              obj[key][2].get<double>());
}

inline Engine parse_engine(const std::string& name, const std::string& where) {
  if (name == "magnus") return Engine::Magnus;
  if (name == "exact") return Engine::Exact;
  if (name == "semiclassical") return Engine::Semiclassical;
  throw ConfigError(where + ": engine must be magnus|exact|semiclassical");
}

inline TimeGridSpec parse_time_grid(const Json& j, const std::string& where) {
  TimeGridSpec g;
  require_keys(j, where,
               {"mode", "min_us", "max_us", "points", "window"});
  const std::string mode = j.value("mode", std::string("auto"));
  if (mode == "auto") {
    g.automatic = true;
  } else if (mode == "explicit") {
    g.automatic = false;
    g.min_us = get_number(j, where, "min_us");
    g.max_us = get_number(j, where, "max_us");
    if (g.min_us < 0.0 || g.max_us <= g.min_us)
      throw ConfigError(where + ": need 0 <= min_us < max_us");
  } else {
    throw ConfigError(where + ": mode must be auto|explicit");
  }
  g.points = static_cast<int>(get_number(j, where, "points", 2000.0));
  if (g.points < 3) throw ConfigError(where + ": points must be >= 3");
  if (j.contains("window")) {
    if (!j["window"].is_array() || j["window"].size() != 2)
      throw ConfigError(where + ": window must be [lo, hi]");
    g.window_lo = j["window"][0].get<double>();
    g.window_hi = j["window"][1].get<double>();
    if (g.window_lo <= 0.0 || g.window_hi <= g.window_lo)
      throw ConfigError(where + ": need 0 < window lo < hi");
  }
  return g;
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& j) {
  using detail::get_number;
  using detail::get_vec3;
  using detail::require_keys;
  RunConfig cfg;
  require_keys(j, "config",
               {"seed", "gamma_nv_MHz_per_G", "gamma_e_MHz_per_G", "field",
                "sensors", "target", "sequence", "time_grid", "engine",
                "include_bystanders", "quadratic_term", "grid", "match",
                "intersect", "library", "bath", "sweep"});

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw ConfigError("config: seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.gamma_nv_mhz =
      get_number(j, "config", "gamma_nv_MHz_per_G", kGammaNvMhzPerG);
  cfg.gamma_e_mhz =
      get_number(j, "config", "gamma_e_MHz_per_G", cfg.gamma_nv_mhz);

  if (!j.contains("field")) throw ConfigError("config: missing 'field'");
  require_keys(j["field"], "field", {"magnitude_G", "direction"});
  cfg.field.magnitude_gauss = get_number(j["field"], "field", "magnitude_G");
  if (cfg.field.magnitude_gauss < 0.0)
    throw ConfigError("field: magnitude_G must be >= 0");
  if (j["field"].contains("direction"))
    cfg.field.direction = get_vec3(j["field"], "field", "direction");

  if (!j.contains("sensors") || !j["sensors"].is_array() ||
      j["sensors"].empty())
    throw ConfigError("config: 'sensors' must be a non-empty array");
  for (const Json& js : j["sensors"]) {
    const std::string where =
        "sensor '" + js.value("id", std::string("?")) + "'";
    require_keys(js, where, {"id", "position_nm", "axis", "strain_MHz"});
    SensorConfig s;
    if (!js.contains("id") || !js["id"].is_string())
      throw ConfigError("sensors: every sensor needs a string 'id'");
    s.id = js["id"].get<std::string>();
    s.position_nm = get_vec3(js, where, "position_nm");
    if (js.contains("axis")) s.axis = get_vec3(js, where, "axis");
    const double strain_mhz = get_number(js, where, "strain_MHz", 0.0);
    if (strain_mhz < 0.0) throw ConfigError(where + ": strain_MHz >= 0");
    s.strain = angular_from_mhz(strain_mhz);
    s.gamma = angular_from_mhz(cfg.gamma_nv_mhz);
    cfg.sensor_strain_mhz.push_back(strain_mhz);
    cfg.sensors.push_back(s);
  }
  for (std::size_t a = 0; a < cfg.sensors.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.sensors.size(); ++b)
      if (cfg.sensors[a].id == cfg.sensors[b].id)
        throw ConfigError("sensors: duplicate id '" + cfg.sensors[a].id + "'");

  if (j.contains("target")) {
    const Json& jt = j["target"];
    require_keys(jt, "target",
                 {"position_nm", "r_nm", "theta_deg", "gamma_MHz_per_G"});
    TargetSpec t;
    t.gamma = angular_from_mhz(
        get_number(jt, "target", "gamma_MHz_per_G", cfg.gamma_e_mhz));
    cfg.gamma_e_mhz = get_number(jt, "target", "gamma_MHz_per_G",
                                 cfg.gamma_e_mhz);
    if (jt.contains("position_nm")) {
      t.position_nm = get_vec3(jt, "target", "position_nm");
    } else if (jt.contains("r_nm") && jt.contains("theta_deg")) {
      const double r = get_number(jt, "target", "r_nm");
      const double theta = rad_from_deg(get_number(jt, "target", "theta_deg"));
      if (r <= 0.0) throw ConfigError("target: r_nm must be > 0");
      cfg.target_polar = {r, theta};
      // resolved against the first sensor's frame below
    } else {
      throw ConfigError("target: need position_nm or (r_nm, theta_deg)");
    }
    cfg.target = t;
  }

  if (j.contains("sequence")) {
    require_keys(j["sequence"], "sequence", {"family", "pulses"});
    cfg.sequence.family = j["sequence"].value("family", std::string("cpmg"));
    if (cfg.sequence.family != "cpmg" && cfg.sequence.family != "xy8")
      throw ConfigError("sequence: family must be cpmg|xy8");
    cfg.sequence.pulses = static_cast<int>(
        get_number(j["sequence"], "sequence", "pulses", 30.0));
    if (cfg.sequence.pulses < 1)
      throw ConfigError("sequence: pulses must be >= 1");
  }

  if (j.contains("time_grid"))
    cfg.time_grid = detail::parse_time_grid(j["time_grid"], "time_grid");
  if (j.contains("engine"))
    cfg.engine =
        detail::parse_engine(j["engine"].get<std::string>(), "config");
  cfg.include_bystanders = j.value("include_bystanders", false);
  cfg.quadratic = j.value("quadratic_term", false);

  if (j.contains("grid")) {
    const Json& jg = j["grid"];
    require_keys(jg, "grid",
                 {"r_min_nm", "r_max_nm", "dr_nm", "theta_min_deg",
                  "theta_max_deg", "dtheta_deg"});
    cfg.grid.r_min_nm = get_number(jg, "grid", "r_min_nm", 5.0);
    cfg.grid.r_max_nm = get_number(jg, "grid", "r_max_nm", 30.0);
    cfg.grid.dr_nm = get_number(jg, "grid", "dr_nm", 0.02);
    cfg.grid.theta_min = rad_from_deg(get_number(jg, "grid", "theta_min_deg", 0.0));
    cfg.grid.theta_max =
        rad_from_deg(get_number(jg, "grid", "theta_max_deg", 90.0));
    cfg.grid.dtheta = rad_from_deg(get_number(jg, "grid", "dtheta_deg", 0.2));
    try {
      cfg.grid.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (j.contains("match")) {
    require_keys(j["match"], "match", {"tol_time_rel", "tol_depth"});
    cfg.match.tol_time_rel =
        get_number(j["match"], "match", "tol_time_rel", 0.0008);
    cfg.match.tol_depth = get_number(j["match"], "match", "tol_depth", 0.01);
    if (cfg.match.tol_time_rel < 0.0 || cfg.match.tol_depth < 0.0)
      throw ConfigError("match: tolerances must be >= 0");
  }
  if (j.contains("intersect")) {
    require_keys(j["intersect"], "intersect", {"voxel_nm"});
    cfg.intersect.voxel_nm =
        get_number(j["intersect"], "intersect", "voxel_nm", 0.05);
    if (cfg.intersect.voxel_nm <= 0.0)
      throw ConfigError("intersect: voxel_nm must be > 0");
  }
  if (j.contains("library")) {
    const Json& jl = j["library"];
    require_keys(jl, "library",
                 {"engine", "refine_points", "spot_fraction", "dip_threshold"});
    if (jl.contains("engine"))
      cfg.library.engine =
          detail::parse_engine(jl["engine"].get<std::string>(), "library");
    cfg.library.refine_points =
        static_cast<int>(get_number(jl, "library", "refine_points", 600.0));
    if (cfg.library.refine_points < 16)
      throw ConfigError("library: refine_points must be >= 16");
    cfg.library.spot_fraction =
        get_number(jl, "library", "spot_fraction", 0.01);
    cfg.library.dip_threshold =
        get_number(jl, "library", "dip_threshold", 0.99);
  }
  if (j.contains("bath")) {
    const Json& jb = j["bath"];
    require_keys(jb, "bath", {"abundance", "cutoff_nm", "seeds", "grid"});
    BathSpecConfig b;
    b.abundance = get_number(jb, "bath", "abundance", kNaturalAbundanceC13);
    b.cutoff_nm = get_number(jb, "bath", "cutoff_nm", 8.0);
    if (jb.contains("seeds")) {
      if (!jb["seeds"].is_array())
        throw ConfigError("bath: seeds must be an array");
      for (const Json& s : jb["seeds"]) b.seeds.push_back(s.get<std::uint64_t>());
    }
    if (jb.contains("grid"))
      b.grid = detail::parse_time_grid(jb["grid"], "bath.grid");
    if (b.grid.automatic)
      throw ConfigError("bath: grid must be explicit");
    cfg.bath = b;
  }
  if (j.contains("sweep")) {
    const Json& js = j["sweep"];
    require_keys(js, "sweep", {"parameter", "values"});
    SweepSpec s;
    s.parameter = js.value("parameter", std::string(""));
    if (s.parameter != "r_nm" && s.parameter != "theta_deg")
      throw ConfigError("sweep: parameter must be r_nm|theta_deg");
    if (!js.contains("values") || !js["values"].is_array() ||
        js["values"].empty())
      throw ConfigError("sweep: values must be a non-empty array");
    for (const Json& v : js["values"]) s.values.push_back(v.get<double>());
    if (!cfg.target_polar)
      throw ConfigError("sweep: requires a target in (r_nm, theta_deg) form");
    cfg.sweep = s;
  }

  // resolve the polar target form against the first sensor
  if (cfg.target_polar) {
    const SensorConfig& s0 = cfg.sensors.front();
    const Vec3 axis = s0.axis.normalized();
    const Vec3 helper =
        std::abs(axis.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 e1 = axis.cross(helper).normalized();
    const auto [r, theta] = *cfg.target_polar;
    cfg.target->position_nm =
        s0.position_nm + r * (std::sin(theta) * e1 + std::cos(theta) * axis);
  }

  WarningLog log;
  for (SensorConfig& s : cfg.sensors) validate_sensor(s, &log);
  cfg.config_hash = fnv1a(j.dump());
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Json j;
  try {
    j = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    // convert the byte offset into a line number
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": " +
                      e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Control-spec hash: a curve can be matched against a library only when
// these resolved values coincide.
inline std::uint64_t control_hash(const RunConfig& cfg,
                                  std::size_t sensor_index) {
  std::string s = "family=" + cfg.sequence.family +
                  ";pulses=" + std::to_string(cfg.sequence.effective_pulses()) +
                  ";B=" + format_double(cfg.field.magnitude_gauss) +
                  ";gamma_nv=" + format_double(cfg.gamma_nv_mhz) +
                  ";gamma_e=" + format_double(cfg.gamma_e_mhz) +
                  ";strain=" +
                  format_double(cfg.sensor_strain_mhz[sensor_index]);
  if (cfg.field.direction) {
    const Vec3 d = cfg.field.direction->normalized();
    s += ";dir=" + format_double(d.x()) + "," + format_double(d.y()) + "," +
         format_double(d.z());
  }
  return fnv1a(s);
}

// ---------------------------------------------------------------------------
// Curve files
// ---------------------------------------------------------------------------

struct CurveFile {
  std::string sensor_id;
  std::string engine;
  std::string family = "cpmg";
  int pulses = 0;
  std::uint64_t config_hash = 0, control_hash = 0;
  CoherenceCurve curve;
};

inline void write_curve_csv(const std::filesystem::path& path,
                            const CurveFile& cf) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  out << "# nvloc-curve v1\n";
  out << "# config=" << hex64(cf.config_hash)
      << " control=" << hex64(cf.control_hash) << " sensor=" << cf.sensor_id
      << " engine=" << cf.engine << " family=" << cf.family
      << " pulses=" << cf.pulses << "\n";
  out << "t_us,L\n";
  for (std::size_t i = 0; i < cf.curve.times_us.size(); ++i)
    out << format_double(cf.curve.times_us[i]) << ","
        << format_double(cf.curve.values[i]) << "\n";
}

inline void write_curve_json(const std::filesystem::path& path,
                             const CurveFile& cf) {
  Json j;
  j["schema"] = "nvloc-curve/1";
  j["config_hash"] = hex64(cf.config_hash);
  j["control_hash"] = hex64(cf.control_hash);
  j["sensor_id"] = cf.sensor_id;
  j["engine"] = cf.engine;
  j["family"] = cf.family;
  j["pulses"] = cf.pulses;
  j["descriptor"] = cf.curve.descriptor;
  j["t_us"] = cf.curve.times_us;
  j["L"] = cf.curve.values;
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline CurveFile read_curve_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve file: " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (j.value("schema", std::string()) != "nvloc-curve/1")
    throw ConfigError(path.string() + ": not an nvloc curve file");
  CurveFile cf;
  cf.sensor_id = j.value("sensor_id", std::string());
  cf.engine = j.value("engine", std::string());
  cf.family = j.value("family", std::string("cpmg"));
  cf.pulses = j.value("pulses", 0);
  cf.config_hash = std::stoull(j.value("config_hash", std::string("0")),
                               nullptr, 16);
  cf.control_hash = std::stoull(j.value("control_hash", std::string("0")),
                                nullptr, 16);
  cf.curve.times_us = j["t_us"].get<std::vector<double>>();
  cf.curve.values = j["L"].get<std::vector<double>>();
  cf.curve.descriptor = j.value("descriptor", std::string());
  return cf;
}

// measured-data ingestion: plain CSV with a t_us,L header, no hash guard
inline CurveFile read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve file: " + path.string());
  CurveFile cf;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t_us", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError(path.string() + ": expected 't,L' rows");
    cf.curve.times_us.push_back(std::stod(line.substr(0, comma)));
    cf.curve.values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (cf.curve.times_us.empty())
    throw ConfigError(path.string() + ": no samples");
  return cf;
}

// ---------------------------------------------------------------------------
// Fingerprint library files
// ---------------------------------------------------------------------------
//
// Binary layout (little-endian):
//   bytes 0-7    magic "NVFPLB01"
//   u64          config hash
//   u64          control hash
//   f64 x4       r_min_nm, r_max_nm, dr_nm, (unused, 0)
//   u64          n_r
//   f64 x4       theta_min_rad, theta_max_rad, dtheta_rad, (unused, 0)
//   u64          n_theta
//   u64          pulses
//   f64 x4       field_G, strain_MHz, gamma_nv_MHz_per_G, gamma_e_MHz_per_G
//   u64          engine (0 magnus, 1 exact)
//   u64          sensor id length, followed by that many bytes
//   cells        n_r * n_theta records of (t_dip_us f64, depth f64),
//                row-major with theta fastest; t_dip_us = -1 marks no dip

static_assert(std::endian::native == std::endian::little,
              "library files are written little-endian");

namespace detail {
template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T take(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace detail

inline void write_library(const std::filesystem::path& path,
                          const FingerprintLibrary& lib) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot write " + path.string());
  out.write("NVFPLB01", 8);
  detail::put<std::uint64_t>(out, lib.config_hash);
  detail::put<std::uint64_t>(out, lib.control_hash);
  detail::put<double>(out, lib.grid.r_min_nm);
  detail::put<double>(out, lib.grid.r_max_nm);
  detail::put<double>(out, lib.grid.dr_nm);
  detail::put<double>(out, 0.0);
  detail::put<std::uint64_t>(out, lib.grid.n_r());
  detail::put<double>(out, lib.grid.theta_min);
  detail::put<double>(out, lib.grid.theta_max);
  detail::put<double>(out, lib.grid.dtheta);
  detail::put<double>(out, 0.0);
  detail::put<std::uint64_t>(out, lib.grid.n_theta());
  detail::put<std::uint64_t>(out, lib.control.pulses);
  detail::put<double>(out, lib.control.field_gauss);
  detail::put<double>(out, lib.control.strain_mhz);
  detail::put<double>(out, lib.control.gamma_nv_mhz);
  detail::put<double>(out, lib.control.gamma_e_mhz);
  detail::put<std::uint64_t>(out,
                             lib.control.engine == Engine::Exact ? 1 : 0);
  detail::put<std::uint64_t>(out, lib.sensor_id.size());
  out.write(lib.sensor_id.data(),
            static_cast<std::streamsize>(lib.sensor_id.size()));
  for (const LibraryCell& c : lib.cells) {
    detail::put<double>(out, c.t_dip_us);
    detail::put<double>(out, c.depth);
  }
}

inline FingerprintLibrary read_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open library file: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "NVFPLB01", 8) != 0)
    throw ConfigError(path.string() + ": not an nvloc library file");
  FingerprintLibrary lib;
  lib.config_hash = detail::take<std::uint64_t>(in);
  lib.control_hash = detail::take<std::uint64_t>(in);
  lib.grid.r_min_nm = detail::take<double>(in);
  lib.grid.r_max_nm = detail::take<double>(in);
  lib.grid.dr_nm = detail::take<double>(in);
  detail::take<double>(in);
  const auto n_r = detail::take<std::uint64_t>(in);
  lib.grid.theta_min = detail::take<double>(in);
  lib.grid.theta_max = detail::take<double>(in);
  lib.grid.dtheta = detail::take<double>(in);
  detail::take<double>(in);
  const auto n_theta = detail::take<std::uint64_t>(in);
  lib.control.pulses = static_cast<int>(detail::take<std::uint64_t>(in));
  lib.control.field_gauss = detail::take<double>(in);
  lib.control.strain_mhz = detail::take<double>(in);
  lib.control.gamma_nv_mhz = detail::take<double>(in);
  lib.control.gamma_e_mhz = detail::take<double>(in);
  lib.control.engine =
      detail::take<std::uint64_t>(in) == 1 ? Engine::Exact : Engine::Magnus;
  const auto id_len = detail::take<std::uint64_t>(in);
  lib.sensor_id.resize(id_len);
  in.read(lib.sensor_id.data(), static_cast<std::streamsize>(id_len));
  if (static_cast<std::uint64_t>(lib.grid.n_r()) != n_r ||
      static_cast<std::uint64_t>(lib.grid.n_theta()) != n_theta)
    throw ConfigError(path.string() + ": grid header inconsistent");
  lib.cells.resize(lib.grid.cells());
  for (LibraryCell& c : lib.cells) {
    c.t_dip_us = detail::take<double>(in);
    c.depth = detail::take<double>(in);
  }
  if (!in) throw ConfigError(path.string() + ": truncated library file");
  return lib;
}

inline void write_library_csv(const std::filesystem::path& path,
                              const FingerprintLibrary& lib) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  out << "# nvloc-library v1 sensor=" << lib.sensor_id
      << " control=" << hex64(lib.control_hash) << "\n";
  out << "r_nm,theta_deg,t_dip_us,depth\n";
  for (int ir = 0; ir < lib.grid.n_r(); ++ir)
    for (int it = 0; it < lib.grid.n_theta(); ++it) {
      const LibraryCell& c = lib.at(ir, it);
      out << format_double(lib.grid.r_at(ir)) << ","
          << format_double(deg_from_rad(lib.grid.theta_at(it))) << ","
          << format_double(c.t_dip_us) << "," << format_double(c.depth)
          << "\n";
    }
}

// ---------------------------------------------------------------------------
// Bath realization files
// ---------------------------------------------------------------------------

inline void write_bath_json(const std::filesystem::path& path,
                            const BathRealization& bath,
                            const BathCurveMeta* meta = nullptr,
                            std::uint64_t config_hash = 0) {
  Json j;
  j["schema"] = "nvloc-bath/1";
  j["config_hash"] = hex64(config_hash);
  j["seed"] = bath.params.seed;
  j["abundance"] = bath.params.abundance;
  j["cutoff_nm"] = bath.params.cutoff_nm;
  j["lattice_nm"] = bath.params.lattice_nm;
  j["core_exclusion_nm"] = bath.params.core_exclusion_nm;
  j["gamma_n_MHz_per_G"] = mhz_from_angular(bath.params.gamma_n);
  j["sensor_id"] = bath.sensor_id;
  j["lambda"] = bath.lambda;
  j["axis"] = {bath.axis.x(), bath.axis.y(), bath.axis.z()};
  Json sites = Json::array();
  for (const BathSpin& s : bath.spins)
    sites.push_back(
        {s.position_nm.x(), s.position_nm.y(), s.position_nm.z()});
  j["sites_nm"] = std::move(sites);
  if (meta) {
    j["pair_count"] = meta->pair_count;
    j["convergence_deviation"] = meta->convergence_deviation;
    j["clamped_clusters"] = meta->clamped_clusters;
  }
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Position estimate files
// ---------------------------------------------------------------------------

inline Json estimate_json(const LocateResult& res,
                          const std::vector<SensorConfig>& sensors,
                          std::uint64_t config_hash) {
  Json j;
  j["schema"] = "nvloc-estimate/1";
  j["config_hash"] = hex64(config_hash);
  Json regions = Json::array();
  for (const Region& r : res.estimate.regions) {
    Json jr;
    jr["centroid_nm"] = {r.centroid_nm.x(), r.centroid_nm.y(),
                         r.centroid_nm.z()};
    jr["bbox_lo_nm"] = {r.bbox_lo_nm.x(), r.bbox_lo_nm.y(), r.bbox_lo_nm.z()};
    jr["bbox_hi_nm"] = {r.bbox_hi_nm.x(), r.bbox_hi_nm.y(), r.bbox_hi_nm.z()};
    jr["voxel_count"] = r.voxel_count;
    jr["resolution_nm"] = r.resolution_nm;
    jr["mirror_branch"] = r.mirror_branch;
    regions.push_back(jr);
  }
  j["regions"] = std::move(regions);
  j["resolution_nm"] = res.estimate.resolution_nm;
  j["ambiguous"] = res.estimate.ambiguous;
  j["flags"] = res.estimate.flags;
  if (!res.estimate.diagnostics.empty())
    j["diagnostics"] = res.estimate.diagnostics;
  Json per_sensor = Json::array();
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    Json js;
    js["id"] = sensors[s].id;
    if (s < res.features.size() && res.features[s]) {
      js["dip_t_us"] = res.features[s]->t_dip_us;
      js["dip_depth"] = res.features[s]->depth;
    }
    if (s < res.matches.size()) {
      js["matched_cells"] = res.matches[s].matched_cells;
      Json intervals = Json::array();
      for (const MatchInterval& box : res.matches[s].intervals) {
        Json ji;
        ji["r_nm"] = {box.r_lo, box.r_hi};
        ji["theta_deg"] = {deg_from_rad(box.theta_lo),
                           deg_from_rad(box.theta_hi)};
        ji["cells"] = box.cell_count;
        intervals.push_back(ji);
      }
      js["intervals"] = std::move(intervals);
      if (!res.matches[s].diagnostic.empty())
        js["diagnostic"] = res.matches[s].diagnostic;
    }
    per_sensor.push_back(js);
  }
  j["per_sensor"] = std::move(per_sensor);
  return j;
}

}  // namespace nvloc
