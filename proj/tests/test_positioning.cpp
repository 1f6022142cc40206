#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nvloc/positioning.hpp"

using namespace nvloc;

namespace {

LibraryControl small_control(double strain_mhz = 3.0,
                             Engine engine = Engine::Exact) {
  LibraryControl ctl;
  ctl.pulses = 30;
  ctl.field_gauss = 0.1;
  ctl.strain_mhz = strain_mhz;
  ctl.engine = engine;
  ctl.refine_points = 400;
  return ctl;
}

LibraryGrid small_grid() {
  LibraryGrid g;
  g.r_min_nm = 6.5;
  g.r_max_nm = 9.5;
  g.dr_nm = 0.05;
  g.theta_min = rad_from_deg(10.0);
  g.theta_max = rad_from_deg(50.0);
  g.dtheta = rad_from_deg(0.5);
  return g;
}

// simulate the curve an experiment would hand to locate()
CoherenceCurve measured_curve(double r_nm, double theta, double strain_mhz,
                              int pulses = 30, int points = 2000) {
  SensorConfig sensor;
  sensor.axis = Vec3(0, 0, 1);
  sensor.strain = angular_from_mhz(strain_mhz);
  FieldConfig field;
  field.magnitude_gauss = 0.1;
  TargetSpec target;
  target.position_nm =
      Vec3(r_nm * std::sin(theta), 0.0, r_nm * std::cos(theta));
  Scenario sc{sensor, field, target, {}, false, ""};
  const DephasingModel m = build_dephasing_model(sensor, field, target, {});
  const NoiseSource& src = m.sources.at(0);
  const double t_pred =
      dip_time(pulses, 1, src.omega, m.lambda, src.a_parallel);
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = t_pred * (0.5 + 1.0 * i / (points - 1));
  return coherence_curve(sc, pulses, grid, Engine::Exact);
}

}  // namespace

TEST_CASE("extract features") {
  // flat curve: no dip
  {
    CoherenceCurve flat;
    for (int i = 0; i < 100; ++i) {
      flat.times_us.push_back(1.0 + i);
      flat.values.push_back(1.0);
    }
    REQUIRE_FALSE(extract_features(flat).has_value());
  }
  // synthetic cosine-shaped dip with a known analytic minimum
  {
    const double t0 = 55.0, width = 4.0, depth = 0.37;
    CoherenceCurve curve;
    for (int i = 0; i < 900; ++i) {
      const double t = 40.0 + i * (30.0 / 899.0);
      const double u = (t - t0) / width;
      curve.times_us.push_back(t);
      curve.values.push_back(1.0 - (1.0 - depth) * std::exp(-u * u));
    }
    const auto f = extract_features(curve);
    REQUIRE(f.has_value());
    REQUIRE(std::abs(f->t_dip_us - t0) < 1e-3 * t0);
    REQUIRE(f->depth == Catch::Approx(depth).margin(1e-4));
  }
  // threshold: shallow dips are not features
  {
    CoherenceCurve shallow;
    for (int i = 0; i < 200; ++i) {
      const double t = 1.0 + i;
      shallow.times_us.push_back(t);
      shallow.values.push_back(1.0 - 0.004 * std::exp(-0.01 * (t - 90) *
                                                      (t - 90)));
    }
    REQUIRE_FALSE(extract_features(shallow, 0.99).has_value());
    REQUIRE(extract_features(shallow, 0.999).has_value());
  }
}

TEST_CASE("library build") {
  // the published grid has 1251 x 451 cells
  {
    LibraryGrid g;
    REQUIRE(g.n_r() == 1251);
    REQUIRE(g.n_theta() == 451);
    REQUIRE(g.cells() == 564201);
  }

  LibraryGrid g = small_grid();
  g.theta_min = 0.0;  // include the sentinel column
  const FingerprintLibrary lib =
      build_library(g, small_control(), "A", 2, 0.0);
  REQUIRE(lib.cells.size() == g.cells());

  // theta = 0: no transverse coupling, sentinel cells
  for (int ir = 0; ir < g.n_r(); ++ir) {
    REQUIRE(lib.at(ir, 0).t_dip_us < 0.0);
    REQUIRE(lib.at(ir, 0).depth == 1.0);
  }

  // self-consistency: a stored cell equals the feature extracted from a
  // freshly simulated curve at the same parameters
  {
    const int ir = g.n_r() / 2, it = g.n_theta() / 2;
    const LibraryCell& cell = lib.at(ir, it);
    REQUIRE(cell.t_dip_us > 0.0);
    const CoherenceCurve fresh =
        measured_curve(g.r_at(ir), g.theta_at(it), 3.0);
    const auto f = extract_features(fresh);
    REQUIRE(f.has_value());
    REQUIRE(std::abs(f->t_dip_us - cell.t_dip_us) < 5e-4 * cell.t_dip_us);
    REQUIRE(std::abs(f->depth - cell.depth) < 5e-3);
  }

  // deterministic across thread counts
  {
    const FingerprintLibrary lib1 =
        build_library(small_grid(), small_control(), "A", 1, 0.0);
    const FingerprintLibrary lib2 =
        build_library(small_grid(), small_control(), "A", 4, 0.0);
    for (std::size_t i = 0; i < lib1.cells.size(); ++i) {
      REQUIRE(lib1.cells[i].t_dip_us == lib2.cells[i].t_dip_us);
      REQUIRE(lib1.cells[i].depth == lib2.cells[i].depth);
    }
  }

  // magnus library carries an exact-engine spot check
  {
    const FingerprintLibrary mlib = build_library(
        small_grid(), small_control(3.0, Engine::Magnus), "A", 2, 0.02, 7);
    REQUIRE(mlib.spot_checked > 0);
    // this grid reaches couplings where the closed form deviates visibly;
    // the spot check exists to surface exactly that
    REQUIRE(mlib.spot_max_ddepth > 0.005);
    REQUIRE(mlib.spot_max_dt_rel < 0.2);
    REQUIRE(mlib.spot_max_ddepth < 0.5);
  }

  REQUIRE_THROWS_AS(build_library(small_grid(),
                                  small_control(3.0, Engine::Semiclassical)),
                    std::invalid_argument);
}

TEST_CASE("matching") {
  const LibraryGrid g = small_grid();
  const FingerprintLibrary lib =
      build_library(g, small_control(), "A", 2, 0.0);

  // self-match with vanishing tolerances returns exactly the source cell
  {
    const int ir = 20, it = 30;
    const LibraryCell& cell = lib.at(ir, it);
    DipFeature f{1, cell.t_dip_us, cell.depth};
    const MatchResult m = match_features(f, lib, 1e-12, 1e-12);
    REQUIRE(m.matched_cells == 1);
    REQUIRE(m.intervals.size() == 1);
    REQUIRE(m.intervals[0].r_lo == Catch::Approx(g.r_at(ir)));
    REQUIRE(m.intervals[0].r_hi == Catch::Approx(g.r_at(ir)));
    REQUIRE(m.intervals[0].theta_lo == Catch::Approx(g.theta_at(it)));
  }

  // shrinking tolerances never enlarges the matched set
  {
    const LibraryCell& cell = lib.at(25, 40);
    DipFeature f{1, cell.t_dip_us * 1.0004, cell.depth + 0.004};
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double scale : {1.0, 0.5, 0.25, 0.1}) {
      const MatchResult m =
          match_features(f, lib, 0.0015 * scale, 0.02 * scale);
      REQUIRE(m.matched_cells <= prev);
      prev = m.matched_cells;
    }
  }

  // empty match reports the nearest cell
  {
    DipFeature f{1, 4.0, 0.2};
    const MatchResult m = match_features(f, lib);
    REQUIRE(m.matched_cells == 0);
    REQUIRE(m.intervals.empty());
    REQUIRE_FALSE(m.diagnostic.empty());
  }

  REQUIRE_THROWS_AS(match_features(DipFeature{1, -1.0, 1.0}, lib),
                    std::invalid_argument);
}

TEST_CASE("intersection") {
  std::vector<SensorConfig> sensors(3);
  const double side = 6.5;
  for (int s = 0; s < 3; ++s) {
    sensors[s].id = std::string(1, char('A' + s));
    sensors[s].axis = Vec3(0, 0, 1);
    const double ang = kTwoPi * s / 3.0;
    sensors[s].position_nm =
        side / std::sqrt(3.0) * Vec3(std::cos(ang), std::sin(ang), 0.0);
  }
  const Vec3 truth(0.7, -0.4, 7.2);

  auto narrow_matches = [&](double dr, double dtheta) {
    std::vector<MatchResult> ms(3);
    for (int s = 0; s < 3; ++s) {
      const Vec3 d = truth - sensors[s].position_nm;
      const double r = d.norm();
      const double theta = std::acos(std::abs(d.z()) / r);
      MatchInterval box;
      box.r_lo = r - dr;
      box.r_hi = r + dr;
      box.theta_lo = theta - dtheta;
      box.theta_hi = theta + dtheta;
      box.cell_count = 1;
      ms[s].intervals.push_back(box);
      ms[s].matched_cells = 1;
    }
    return ms;
  };

  // tight intervals: a small region containing the truth (mirror twin below
  // the sensor plane is geometrically unavoidable here)
  {
    const PositionEstimate est =
        intersect_sensors(sensors, narrow_matches(0.06, rad_from_deg(0.5)),
                          0.05, 2);
    REQUIRE_FALSE(est.regions.empty());
    bool contains = false;
    for (const Region& r : est.regions)
      if ((truth - r.centroid_nm).cwiseAbs().maxCoeff() < 0.2 &&
          !r.mirror_branch)
        contains = true;
    REQUIRE(contains);
    for (const Region& r : est.regions) REQUIRE(r.resolution_nm < 0.5);
    // the coplanar layout leaves the mirrored twin: flagged ambiguous
    REQUIRE(est.regions.size() == 2);
    REQUIRE(est.ambiguous);
    REQUIRE(est.regions[0].mirror_branch != est.regions[1].mirror_branch);
  }

  // mirror-branch completeness: a truth below the plane (theta > 90 deg) is
  // found through the pi - theta branch of the same intervals
  {
    const Vec3 mirrored(truth.x(), truth.y(), -truth.z());
    const PositionEstimate est =
        intersect_sensors(sensors, narrow_matches(0.06, rad_from_deg(0.5)),
                          0.05, 1);
    bool found = false;
    for (const Region& r : est.regions)
      if ((mirrored - r.centroid_nm).cwiseAbs().maxCoeff() < 0.2 &&
          r.mirror_branch)
        found = true;
    REQUIRE(found);
  }

  // coincident sensors: degenerate ring, flagged ambiguous
  {
    std::vector<SensorConfig> same(3, sensors[0]);
    std::vector<MatchResult> ms(3);
    const Vec3 d = truth - same[0].position_nm;
    MatchInterval ring;
    ring.r_lo = d.norm() - 0.15;
    ring.r_hi = d.norm() + 0.15;
    const double theta = std::acos(std::abs(d.z()) / d.norm());
    ring.theta_lo = theta - rad_from_deg(1.5);
    ring.theta_hi = theta + rad_from_deg(1.5);
    ring.cell_count = 1;
    for (auto& m : ms) {
      m.intervals.push_back(ring);
      m.matched_cells = 1;
    }
    const PositionEstimate est = intersect_sensors(same, ms, 0.1, 2);
    REQUIRE(est.ambiguous);  // full circle of candidates
    REQUIRE_FALSE(est.flags.empty());
    REQUIRE(est.resolution_nm > kAmbiguousExtentNm);
  }

  // disjoint annuli: explicit empty result
  {
    std::vector<MatchResult> ms = narrow_matches(0.02, rad_from_deg(0.2));
    ms[0].intervals[0].r_lo += 3.0;
    ms[0].intervals[0].r_hi += 3.0;
    const PositionEstimate est = intersect_sensors(sensors, ms, 0.1, 1);
    REQUIRE(est.regions.empty());
    REQUIRE_FALSE(est.diagnostics.empty());
  }

  REQUIRE_THROWS_AS(intersect_sensors({}, {}, 0.05), std::invalid_argument);
  REQUIRE_THROWS_AS(
      intersect_sensors(sensors, narrow_matches(0.1, 0.01), -1.0),
      std::invalid_argument);
}

TEST_CASE("locate round trip") {
  // three sensors, strains 3/2/4 MHz, on a 6.5 nm triangle
  std::vector<SensorConfig> sensors(3);
  const double strains[3] = {3.0, 2.0, 4.0};
  for (int s = 0; s < 3; ++s) {
    sensors[s].id = std::string(1, char('A' + s));
    sensors[s].axis = Vec3(0, 0, 1);
    sensors[s].strain = angular_from_mhz(strains[s]);
    const double ang = kTwoPi * s / 3.0;
    sensors[s].position_nm =
        6.5 / std::sqrt(3.0) * Vec3(std::cos(ang), std::sin(ang), 0.0);
  }
  FieldConfig field;
  field.magnitude_gauss = 0.1;

  std::vector<FingerprintLibrary> libs;
  for (int s = 0; s < 3; ++s)
    libs.push_back(
        build_library(small_grid(), small_control(strains[s]), sensors[s].id,
                      2, 0.0));

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(-0.8, 0.8), uz(6.8, 8.2);
  int hits = 0;
  const int trials = 5;
  for (int trial = 0; trial < trials; ++trial) {
    const Vec3 truth(ux(rng), ux(rng), uz(rng));
    std::vector<CoherenceCurve> curves;
    bool in_grid = true;
    for (int s = 0; s < 3; ++s) {
      const Vec3 d = truth - sensors[s].position_nm;
      const double r = d.norm();
      const double theta = std::acos(std::abs(d.z()) / r);
      if (r < 6.6 || r > 9.4 || theta < rad_from_deg(11.0) ||
          theta > rad_from_deg(49.0))
        in_grid = false;
      curves.push_back(measured_curve(r, theta, strains[s]));
    }
    if (!in_grid) continue;
    const LocateResult res = locate(curves, libs, sensors, 0.0015, 0.02);
    REQUIRE_FALSE(res.estimate.regions.empty());
    bool contained = false;
    for (const Region& region : res.estimate.regions)
      if ((truth.array() >= region.bbox_lo_nm.array() - 0.05).all() &&
          (truth.array() <= region.bbox_hi_nm.array() + 0.05).all())
        contained = true;
    REQUIRE(contained);
    ++hits;
  }
  REQUIRE(hits >= 2);  // the box keeps most draws inside the small grid

  // self-match soundness on a random sample of library cells
  {
    const FingerprintLibrary& lib = libs[0];
    std::mt19937_64 cell_rng(77);
    int checked = 0;
    for (int k = 0; k < 100 && checked < 12; ++k) {
      const int ir = int(cell_rng() % lib.grid.n_r());
      const int it = int(cell_rng() % lib.grid.n_theta());
      const LibraryCell& cell = lib.at(ir, it);
      if (cell.t_dip_us <= 0.0) continue;
      const CoherenceCurve fresh =
          measured_curve(lib.grid.r_at(ir), lib.grid.theta_at(it), 3.0);
      const auto f = extract_features(fresh);
      REQUIRE(f.has_value());
      const MatchResult m = match_features(*f, lib, 0.0015, 0.02);
      bool covered = false;
      for (const MatchInterval& box : m.intervals)
        if (lib.grid.r_at(ir) >= box.r_lo - 1e-9 &&
            lib.grid.r_at(ir) <= box.r_hi + 1e-9 &&
            lib.grid.theta_at(it) >= box.theta_lo - 1e-9 &&
            lib.grid.theta_at(it) <= box.theta_hi + 1e-9)
          covered = true;
      REQUIRE(covered);
      ++checked;
    }
    REQUIRE(checked >= 10);
  }
}
