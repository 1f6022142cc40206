#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nvloc/coherence.hpp"
#include "nvloc/parallel.hpp"

namespace nvloc {

// ---------------------------------------------------------------------------
// Grid and library
// ---------------------------------------------------------------------------

struct LibraryGrid {
  double r_min_nm = 5.0, r_max_nm = 30.0, dr_nm = 0.02;
  double theta_min = 0.0, theta_max = 0.5 * kPi, dtheta = rad_from_deg(0.2);

  int n_r() const {
    return static_cast<int>(std::lround((r_max_nm - r_min_nm) / dr_nm)) + 1;
  }
  int n_theta() const {
    return static_cast<int>(std::lround((theta_max - theta_min) / dtheta)) + 1;
  }
  std::size_t cells() const {
    return static_cast<std::size_t>(n_r()) * n_theta();
  }
  double r_at(int i) const { return r_min_nm + i * dr_nm; }
  double theta_at(int j) const { return theta_min + j * dtheta; }
  void validate() const {
    if (dr_nm <= 0.0 || dtheta <= 0.0)
      throw std::invalid_argument("library grid: steps must be > 0");
    if (r_min_nm <= 0.0 || r_max_nm < r_min_nm)
      throw std::invalid_argument("library grid: bad distance range");
    if (theta_min < 0.0 || theta_max > kPi || theta_max < theta_min)
      throw std::invalid_argument("library grid: bad zenith range");
  }
};

// Control/field/sensor spec a library is valid for.
struct LibraryControl {
  int pulses = 30;
  double field_gauss = 0.1;
  double strain_mhz = 3.0;
  double gamma_nv_mhz = kGammaNvMhzPerG;
  double gamma_e_mhz = kGammaNvMhzPerG;
  Engine engine = Engine::Exact;
  int refine_points = 600;        // samples for the per-cell dip search
  double window_lo = 0.5, window_hi = 1.5;
  double dip_threshold = 0.99;

  double omega_nv() const {
    return std::abs(angular_from_mhz(gamma_nv_mhz)) * field_gauss;
  }
  double omega_e() const {
    return std::abs(angular_from_mhz(gamma_e_mhz)) * field_gauss;
  }
  double lambda() const {
    return renormalization_factor(angular_from_mhz(strain_mhz), omega_nv());
  }
};

// t_dip < 0 marks a cell with no dip in the search window.
struct LibraryCell {
  double t_dip_us = -1.0;
  double depth = 1.0;
};

struct FingerprintLibrary {
  LibraryGrid grid;
  LibraryControl control;
  std::string sensor_id;
  std::uint64_t config_hash = 0, control_hash = 0;
  std::vector<LibraryCell> cells;  // row-major, r outer, theta inner
  // exact-engine spot verification summary (Magnus-built libraries)
  int spot_checked = 0;
  double spot_max_dt_rel = 0.0, spot_max_ddepth = 0.0;

  const LibraryCell& at(int ir, int it) const {
    return cells[static_cast<std::size_t>(ir) * grid.n_theta() + it];
  }
};

// ---------------------------------------------------------------------------
// Dip feature extraction
// ---------------------------------------------------------------------------

struct DipFeature {
  int order = 1;
  double t_dip_us = 0.0;
  double depth = 1.0;
};

// The first-order dip of a curve sampled over its first-dip window: the
// global minimum below the threshold, refined by the parabola through the
// minimum sample and its neighbors. (The first local minimum would hook the
// shallow filter sidelobes that precede the resonance at strong coupling.)
inline std::optional<DipFeature> extract_features(const CoherenceCurve& curve,
                                                  double threshold = 0.99) {
  const auto& t = curve.times_us;
  const auto& l = curve.values;
  if (l.size() < 3) return std::nullopt;
  std::size_t i = 1;
  for (std::size_t k = 1; k + 1 < l.size(); ++k)
    if (l[k] < l[i]) i = k;
  if (l[i] >= threshold) return std::nullopt;
  const double x0 = t[i - 1], x1 = t[i], x2 = t[i + 1];
  const double y0 = l[i - 1], y1 = l[i], y2 = l[i + 1];
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curv = (d12 - d01) / (x2 - x0);
  DipFeature f;
  if (curv <= 0.0) {
    f.t_dip_us = x1;
    f.depth = y1;
  } else {
    const double xv = 0.5 * (x0 + x1 - d01 / curv);
    f.t_dip_us = std::clamp(xv, x0, x2);
    // evaluate the parabola at the vertex
    f.depth = y0 + d01 * (f.t_dip_us - x0) +
              curv * (f.t_dip_us - x0) * (f.t_dip_us - x1);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Library build
// ---------------------------------------------------------------------------

namespace detail {

inline LibraryCell library_cell(const LibraryGrid& grid,
                                const LibraryControl& ctl, int ir, int it) {
  const double r = grid.r_at(ir);
  const double theta = grid.theta_at(it);
  const double lambda = ctl.lambda();
  const DipolarComponents c = dipolar_components(
      r, theta, angular_from_mhz(ctl.gamma_nv_mhz),
      angular_from_mhz(ctl.gamma_e_mhz), 1.0);  // lambda applied below
  const double shifted = ctl.omega_e() + 0.5 * lambda * c.a_parallel;
  LibraryCell cell;
  if (shifted <= 0.0 || c.a_perp == 0.0) return cell;
  const double t_pred = kPi * ctl.pulses / shifted;
  const int m = ctl.refine_points;
  const double lo = ctl.window_lo * t_pred;
  const double hi = ctl.window_hi * t_pred;
  CoherenceCurve curve;
  curve.times_us.resize(m);
  curve.values.resize(m);
  for (int k = 0; k < m; ++k)
    curve.times_us[k] = lo + (hi - lo) * k / (m - 1);
  if (ctl.engine == Engine::Magnus) {
    const double kappa = 0.5 * lambda * c.a_perp / shifted;
    for (int k = 0; k < m; ++k)
      curve.values[k] = std::cos(
          kappa * filter_cpmg_closed(ctl.pulses, curve.times_us[k], shifted));
  } else {
    const std::array<double, 3> h_plus = {lambda * c.a_perp, 0.0,
                                          ctl.omega_e() +
                                              lambda * c.a_parallel};
    const std::array<double, 3> h_zero = {0.0, 0.0, ctl.omega_e()};
    for (int k = 0; k < m; ++k)
      curve.values[k] = cpmg_bifurcated_overlap(h_plus, h_zero, ctl.pulses,
                                                curve.times_us[k]);
  }
  if (auto f = extract_features(curve, ctl.dip_threshold)) {
    cell.t_dip_us = f->t_dip_us;
    cell.depth = f->depth;
  }
  return cell;
}

}  // namespace detail

inline FingerprintLibrary build_library(const LibraryGrid& grid,
                                        const LibraryControl& control,
                                        const std::string& sensor_id = "A",
                                        int threads = 1,
                                        double spot_check_fraction = 0.01,
                                        std::uint64_t spot_seed = 1) {
  grid.validate();
  if (control.engine == Engine::Semiclassical)
    throw std::invalid_argument(
        "build_library: engine must be magnus or exact");
  FingerprintLibrary lib;
  lib.grid = grid;
  lib.control = control;
  lib.sensor_id = sensor_id;
  lib.cells.resize(grid.cells());
  const int nt = grid.n_theta();
  parallel_for(grid.cells(), threads, [&](std::size_t idx) {
    lib.cells[idx] = detail::library_cell(grid, control,
                                          static_cast<int>(idx) / nt,
                                          static_cast<int>(idx) % nt);
  });

  if (control.engine == Engine::Magnus && spot_check_fraction > 0.0) {
    const std::size_t n_spot = static_cast<std::size_t>(
        std::ceil(spot_check_fraction * double(grid.cells())));
    std::mt19937_64 rng(spot_seed);
    LibraryControl exact_ctl = control;
    exact_ctl.engine = Engine::Exact;
    std::vector<std::size_t> picks(n_spot);
    for (auto& p : picks) p = rng() % grid.cells();
    std::vector<double> dts(n_spot, 0.0), dds(n_spot, 0.0);
    parallel_for(n_spot, threads, [&](std::size_t k) {
      const std::size_t idx = picks[k];
      const LibraryCell ref = detail::library_cell(
          grid, exact_ctl, static_cast<int>(idx) / nt,
          static_cast<int>(idx) % nt);
      const LibraryCell& got = lib.cells[idx];
      if (ref.t_dip_us > 0.0 && got.t_dip_us > 0.0) {
        dts[k] = std::abs(got.t_dip_us - ref.t_dip_us) / ref.t_dip_us;
        dds[k] = std::abs(got.depth - ref.depth);
      }
    });
    lib.spot_checked = static_cast<int>(n_spot);
    for (std::size_t k = 0; k < n_spot; ++k) {
      lib.spot_max_dt_rel = std::max(lib.spot_max_dt_rel, dts[k]);
      lib.spot_max_ddepth = std::max(lib.spot_max_ddepth, dds[k]);
    }
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

struct MatchInterval {
  double r_lo = 0.0, r_hi = 0.0;      // nm, cell centers
  double theta_lo = 0.0, theta_hi = 0.0;  // rad
  std::size_t cell_count = 0;
};

struct MatchResult {
  std::vector<MatchInterval> intervals;  // one per connected component
  std::size_t matched_cells = 0;
  double tol_time_rel = 0.0, tol_depth = 0.0;
  // half a grid step per axis: a matched cell stands for its whole cell area,
  // which is what the voxel intersection must test against
  double r_halfstep = 0.0, theta_halfstep = 0.0;
  std::string diagnostic;  // nearest-cell report when empty
};

inline MatchResult match_features(const DipFeature& feature,
                                  const FingerprintLibrary& lib,
                                  double tol_time_rel = 0.0008,
                                  double tol_depth = 0.01) {
  if (feature.t_dip_us <= 0.0)
    throw std::invalid_argument("match_features: feature has no dip");
  MatchResult out;
  out.tol_time_rel = tol_time_rel;
  out.tol_depth = tol_depth;
  out.r_halfstep = 0.5 * lib.grid.dr_nm;
  out.theta_halfstep = 0.5 * lib.grid.dtheta;
  const int nr = lib.grid.n_r(), nt = lib.grid.n_theta();
  std::vector<char> hit(lib.cells.size(), 0);
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t idx = 0; idx < lib.cells.size(); ++idx) {
    const LibraryCell& c = lib.cells[idx];
    if (c.t_dip_us <= 0.0) continue;
    const double dt = std::abs(c.t_dip_us - feature.t_dip_us) /
                      feature.t_dip_us;
    const double dd = std::abs(c.depth - feature.depth);
    if (dt <= tol_time_rel && dd <= tol_depth) {
      hit[idx] = 1;
      ++out.matched_cells;
    }
    const double score = dt / tol_time_rel + dd / tol_depth;
    if (score < best_score) {
      best_score = score;
      best_idx = idx;
    }
  }
  if (out.matched_cells == 0) {
    const int ir = static_cast<int>(best_idx) / nt;
    const int it = static_cast<int>(best_idx) % nt;
    out.diagnostic = "no match; nearest cell (R=" +
                     std::to_string(lib.grid.r_at(ir)) + " nm, theta=" +
                     std::to_string(deg_from_rad(lib.grid.theta_at(it))) +
                     " deg) t=" + std::to_string(lib.cells[best_idx].t_dip_us) +
                     " us depth=" + std::to_string(lib.cells[best_idx].depth);
    return out;
  }
  // merge matching cells into connected components (8-neighborhood, so
  // diagonal chains along the time-depth trade-off stay one interval) and
  // report each component's bounding intervals
  std::vector<char> seen(lib.cells.size(), 0);
  for (std::size_t idx = 0; idx < lib.cells.size(); ++idx) {
    if (!hit[idx] || seen[idx]) continue;
    MatchInterval box;
    int r_lo = nr, r_hi = -1, t_lo = nt, t_hi = -1;
    std::deque<std::size_t> queue{idx};
    seen[idx] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      ++box.cell_count;
      const int ir = static_cast<int>(cur) / nt;
      const int it = static_cast<int>(cur) % nt;
      r_lo = std::min(r_lo, ir);
      r_hi = std::max(r_hi, ir);
      t_lo = std::min(t_lo, it);
      t_hi = std::max(t_hi, it);
      for (int dr = -1; dr <= 1; ++dr)
        for (int dt = -1; dt <= 1; ++dt) {
          if (dr == 0 && dt == 0) continue;
          const int jr = ir + dr, jt = it + dt;
          if (jr < 0 || jr >= nr || jt < 0 || jt >= nt) continue;
          const std::size_t nxt = static_cast<std::size_t>(jr) * nt + jt;
          if (hit[nxt] && !seen[nxt]) {
            seen[nxt] = 1;
            queue.push_back(nxt);
          }
        }
    }
    box.r_lo = lib.grid.r_at(r_lo);
    box.r_hi = lib.grid.r_at(r_hi);
    box.theta_lo = lib.grid.theta_at(t_lo);
    box.theta_hi = lib.grid.theta_at(t_hi);
    out.intervals.push_back(box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-sensor intersection
// ---------------------------------------------------------------------------

struct Region {
  Vec3 centroid_nm = Vec3::Zero();
  Vec3 bbox_lo_nm = Vec3::Zero(), bbox_hi_nm = Vec3::Zero();
  std::size_t voxel_count = 0;
  double resolution_nm = 0.0;  // max bounding-box edge
  bool mirror_branch = false;  // zenith > 90 deg w.r.t. the first sensor
};

struct PositionEstimate {
  std::vector<Region> regions;
  double resolution_nm = 0.0;  // max edge over regions; 0 when empty
  bool ambiguous = false;
  std::vector<std::string> flags;
  std::string diagnostics;
};

inline constexpr double kAmbiguousExtentNm = 1.5;

// Keep voxels whose (R_i, min(theta_i, pi - theta_i)) lies inside some
// matched interval of every sensor; report connected components.
inline PositionEstimate intersect_sensors(
    const std::vector<SensorConfig>& sensors,
    const std::vector<MatchResult>& matches, double voxel_nm = 0.05,
    int threads = 1) {
  if (sensors.size() != matches.size() || sensors.empty())
    throw std::invalid_argument(
        "intersect_sensors: one match result per sensor required");
  if (voxel_nm <= 0.0)
    throw std::invalid_argument("intersect_sensors: voxel must be > 0");
  PositionEstimate est;
  for (std::size_t s = 1; s < sensors.size(); ++s)
    if ((sensors[s].position_nm - sensors[0].position_nm).norm() < 1e-9)
      est.flags.push_back("degenerate-geometry: sensors " + sensors[0].id +
                          "," + sensors[s].id + " coincide");
  for (std::size_t s = 0; s < sensors.size(); ++s)
    if (matches[s].intervals.empty()) {
      est.diagnostics = "sensor " + sensors[s].id + ": " +
                        (matches[s].diagnostic.empty() ? "empty match"
                                                       : matches[s].diagnostic);
      return est;
    }

  // bounding box: intersection of the per-sensor outer-radius boxes
  Vec3 lo = Vec3::Constant(-std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    double r_hi = 0.0;
    for (const MatchInterval& box : matches[s].intervals)
      r_hi = std::max(r_hi, box.r_hi + matches[s].r_halfstep);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(lo[a], sensors[s].position_nm[a] - r_hi);
      hi[a] = std::min(hi[a], sensors[s].position_nm[a] + r_hi);
    }
  }
  if ((hi - lo).minCoeff() <= 0.0) {
    est.diagnostics = "sensor annuli do not overlap";
    return est;
  }
  long nx[3];
  Vec3 base;
  for (int a = 0; a < 3; ++a) {
    base[a] = std::floor(lo[a] / voxel_nm) * voxel_nm;
    nx[a] = static_cast<long>(std::ceil((hi[a] - base[a]) / voxel_nm));
    if (nx[a] < 1) nx[a] = 1;
  }

  auto consistent = [&](const Vec3& v, double pad_r, double pad_scale) {
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const Vec3 d = v - sensors[s].position_nm;
      const double r = d.norm();
      if (r < 1e-9) return false;
      const double theta_eff =
          std::acos(std::min(1.0, std::abs(d.dot(sensors[s].axis)) / r));
      const double pad_theta = pad_scale / std::max(r - pad_r, 0.5);
      bool ok = false;
      for (const MatchInterval& box : matches[s].intervals) {
        if (r >= box.r_lo - matches[s].r_halfstep - pad_r &&
            r <= box.r_hi + matches[s].r_halfstep + pad_r &&
            theta_eff >= box.theta_lo - matches[s].theta_halfstep - pad_theta &&
            theta_eff <= box.theta_hi + matches[s].theta_halfstep + pad_theta) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
    return true;
  };

  // the fine grid can run to ~1e9 virtual voxels, so scan a coarse grid
  // first (conservatively padded by its half-diagonal) and refine only the
  // surviving blocks, keeping accepted voxels sparse
  constexpr long kRefine = 8;
  const double coarse = kRefine * voxel_nm;
  const double half_diag = 0.5 * std::sqrt(3.0) * coarse;
  long ncx[3];
  for (int a = 0; a < 3; ++a) ncx[a] = (nx[a] + kRefine - 1) / kRefine;
  const std::size_t n_coarse =
      static_cast<std::size_t>(ncx[0]) * ncx[1] * ncx[2];
  std::vector<char> coarse_keep(n_coarse, 0);
  parallel_for(n_coarse, threads, [&](std::size_t idx) {
    const long cz = static_cast<long>(idx % ncx[2]);
    const long cy = static_cast<long>((idx / ncx[2]) % ncx[1]);
    const long cx = static_cast<long>(
        idx / (static_cast<std::size_t>(ncx[1]) * ncx[2]));
    const Vec3 center = base + coarse * Vec3(cx + 0.5, cy + 0.5, cz + 0.5);
    if (consistent(center, half_diag, half_diag)) coarse_keep[idx] = 1;
  });
  std::vector<std::size_t> blocks;
  for (std::size_t idx = 0; idx < n_coarse; ++idx)
    if (coarse_keep[idx]) blocks.push_back(idx);

  std::vector<std::vector<std::size_t>> block_hits(blocks.size());
  parallel_for(blocks.size(), threads, [&](std::size_t b) {
    const std::size_t idx = blocks[b];
    const long cz = static_cast<long>(idx % ncx[2]);
    const long cy = static_cast<long>((idx / ncx[2]) % ncx[1]);
    const long cx = static_cast<long>(
        idx / (static_cast<std::size_t>(ncx[1]) * ncx[2]));
    for (long ix = cx * kRefine; ix < std::min((cx + 1) * kRefine, nx[0]); ++ix)
      for (long iy = cy * kRefine; iy < std::min((cy + 1) * kRefine, nx[1]);
           ++iy)
        for (long iz = cz * kRefine; iz < std::min((cz + 1) * kRefine, nx[2]);
             ++iz) {
          const Vec3 v = base + voxel_nm * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
          if (consistent(v, 0.0, 0.0))
            block_hits[b].push_back(
                (static_cast<std::size_t>(ix) * nx[1] + iy) * nx[2] + iz);
        }
  });
  std::vector<std::size_t> kept;
  for (const auto& hits : block_hits)
    kept.insert(kept.end(), hits.begin(), hits.end());
  std::sort(kept.begin(), kept.end());

  // flood fill (26-neighborhood) over the sparse voxel set
  std::unordered_map<std::size_t, char> state;
  state.reserve(kept.size() * 2);
  for (std::size_t idx : kept) state.emplace(idx, 0);
  for (std::size_t idx : kept) {
    if (state[idx]) continue;
    Region region;
    long blo[3] = {nx[0], nx[1], nx[2]}, bhi[3] = {-1, -1, -1};
    Vec3 sum = Vec3::Zero();
    std::deque<std::size_t> queue{idx};
    state[idx] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      ++region.voxel_count;
      const long iz = static_cast<long>(cur % nx[2]);
      const long iy = static_cast<long>((cur / nx[2]) % nx[1]);
      const long ix = static_cast<long>(
          cur / (static_cast<std::size_t>(nx[1]) * nx[2]));
      const long c[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        blo[a] = std::min(blo[a], c[a]);
        bhi[a] = std::max(bhi[a], c[a]);
      }
      sum += base + voxel_nm * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
      for (long dx = -1; dx <= 1; ++dx)
        for (long dy = -1; dy <= 1; ++dy)
          for (long dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const long jx = ix + dx, jy = iy + dy, jz = iz + dz;
            if (jx < 0 || jx >= nx[0] || jy < 0 || jy >= nx[1] || jz < 0 ||
                jz >= nx[2])
              continue;
            const std::size_t nxt =
                (static_cast<std::size_t>(jx) * nx[1] + jy) * nx[2] + jz;
            const auto it = state.find(nxt);
            if (it != state.end() && !it->second) {
              it->second = 1;
              queue.push_back(nxt);
            }
          }
    }
    region.centroid_nm = sum / double(region.voxel_count);
    for (int a = 0; a < 3; ++a) {
      region.bbox_lo_nm[a] = base[a] + blo[a] * voxel_nm;
      region.bbox_hi_nm[a] = base[a] + (bhi[a] + 1) * voxel_nm;
      region.resolution_nm = std::max(
          region.resolution_nm, region.bbox_hi_nm[a] - region.bbox_lo_nm[a]);
    }
    const Vec3 rel = region.centroid_nm - sensors[0].position_nm;
    region.mirror_branch = rel.dot(sensors[0].axis) < 0.0;
    est.regions.push_back(region);
  }

  std::sort(est.regions.begin(), est.regions.end(),
            [](const Region& a, const Region& b) {
              if (a.voxel_count != b.voxel_count)
                return a.voxel_count > b.voxel_count;
              return a.centroid_nm.z() > b.centroid_nm.z();
            });
  for (const Region& r : est.regions)
    est.resolution_nm = std::max(est.resolution_nm, r.resolution_nm);
  if (est.regions.size() > 1) {
    est.ambiguous = true;
    est.flags.push_back("multiple candidate regions (mirror branch)");
  }
  if (!est.regions.empty() && est.resolution_nm > kAmbiguousExtentNm) {
    est.ambiguous = true;
    est.flags.push_back("region extent exceeds " +
                        std::to_string(kAmbiguousExtentNm) + " nm");
  }
  if (est.regions.empty()) est.diagnostics = "no consistent voxel";
  return est;
}

// ---------------------------------------------------------------------------
// End-to-end localization
// ---------------------------------------------------------------------------

struct LocateResult {
  PositionEstimate estimate;
  std::vector<std::optional<DipFeature>> features;
  std::vector<MatchResult> matches;
};

inline LocateResult locate(const std::vector<CoherenceCurve>& curves,
                           const std::vector<FingerprintLibrary>& libraries,
                           const std::vector<SensorConfig>& sensors,
                           double tol_time_rel = 0.0008,
                           double tol_depth = 0.01, double voxel_nm = 0.05,
                           double dip_threshold = 0.99, int threads = 1) {
  if (curves.size() != libraries.size() || curves.size() != sensors.size())
    throw std::invalid_argument("locate: curves/libraries/sensors mismatch");
  LocateResult out;
  for (std::size_t s = 0; s < curves.size(); ++s) {
    out.features.push_back(extract_features(curves[s], dip_threshold));
    if (!out.features.back()) {
      MatchResult empty;
      empty.diagnostic = "no dip below threshold in curve";
      out.matches.push_back(empty);
      continue;
    }
    out.matches.push_back(match_features(*out.features.back(), libraries[s],
                                         tol_time_rel, tol_depth));
  }
  out.estimate = intersect_sensors(sensors, out.matches, voxel_nm, threads);
  return out;
}

}  // namespace nvloc
