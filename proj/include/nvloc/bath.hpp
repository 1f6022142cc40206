#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "nvloc/coherence.hpp"
#include "nvloc/dipolar.hpp"
#include "nvloc/su2.hpp"

namespace nvloc {

struct BathSpin {
  Vec3 position_nm = Vec3::Zero();
};

// One flip-flopping 13C pair: intra-pair amplitude b and the sensor-state
// conditioned detuning delta (difference of lambda-scaled hyperfine shifts).
struct BathPair {
  int i = 0, j = 0;
  double flip_flop = 0.0;      // rad/us
  double delta_hyperfine = 0.0;  // rad/us
  double separation_nm = 0.0;
};

struct BathParams {
  std::uint64_t seed = 1;
  double abundance = kNaturalAbundanceC13;
  double cutoff_nm = 8.0;
  double lattice_nm = kDiamondLatticeNm;
  double core_exclusion_nm = 0.25;  // sites inside belong to the defect
  double gamma_n = angular_from_mhz(kGammaC13MhzPerG);  // rad/(us*G)
  // pairs below either floor contribute nothing at the 1e-3 coherence level
  double coupling_floor = kTwoPi * 1e-6;   // rad/us (2pi * 1 Hz)
  double detuning_floor = kTwoPi * 1e-6;   // rad/us
};

struct BathRealization {
  BathParams params;
  std::string sensor_id;
  double lambda = 1.0;
  Vec3 axis = Vec3(0, 0, 1);
  std::vector<BathSpin> spins;
  std::vector<Vec3> hyperfine;      // lambda * (axis . A_m), rad/us
  std::vector<double> hyperfine_z;  // component along the sensor axis
  std::vector<BathPair> pairs;
};

namespace detail {
inline const std::array<Vec3, 8>& diamond_basis() {
  static const std::array<Vec3, 8> basis = {
      Vec3(0, 0, 0),          Vec3(0, 0.5, 0.5),      Vec3(0.5, 0, 0.5),
      Vec3(0.5, 0.5, 0),      Vec3(0.25, 0.25, 0.25), Vec3(0.25, 0.75, 0.75),
      Vec3(0.75, 0.25, 0.75), Vec3(0.75, 0.75, 0.25)};
  return basis;
}

inline double uniform_unit(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}
}  // namespace detail

inline void enumerate_pairs(BathRealization& bath) {
  bath.pairs.clear();
  const double gn = bath.params.gamma_n;
  const int n = static_cast<int>(bath.spins.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3 d = bath.spins[j].position_nm - bath.spins[i].position_nm;
      const double r = d.norm();
      // |b| <= kDipolarCoeffNm3 gn^2 / (2 r^3); skip the tensor beyond reach
      if (kDipolarCoeffNm3 * gn * gn / (2.0 * r * r * r) <
          bath.params.coupling_floor)
        continue;
      const double delta = bath.hyperfine_z[i] - bath.hyperfine_z[j];
      if (std::abs(delta) < bath.params.detuning_floor) continue;
      const double d_zz =
          axial_component(dipolar_tensor(d, gn, gn).tensor, bath.axis);
      const double b = -0.25 * d_zz;  // secular like-spin flip-flop amplitude
      if (std::abs(b) < bath.params.coupling_floor) continue;
      bath.pairs.push_back({i, j, b, delta, r});
    }
  }
}

// Occupy diamond lattice sites around the sensor with the configured 13C
// abundance. Sites are visited in a fixed lexicographic order, so a given
// (seed, parameters) always yields the same realization.
inline BathRealization generate_bath(const BathParams& params,
                                     const SensorConfig& sensor,
                                     const FieldConfig& field) {
  if (params.abundance < 0.0 || params.abundance > 1.0)
    throw std::invalid_argument("generate_bath: abundance outside [0,1]");
  if (params.cutoff_nm <= 0.0)
    throw std::invalid_argument("generate_bath: cutoff must be > 0");
  BathRealization bath;
  bath.params = params;
  bath.sensor_id = sensor.id;
  bath.axis = sensor.axis;
  const double omega_nv = nv_larmor(sensor, field);
  const double gap = std::hypot(sensor.strain, omega_nv);
  bath.lambda = (gap == 0.0) ? 1.0 : omega_nv / gap;

  std::mt19937_64 rng(params.seed);
  const double a = params.lattice_nm;
  const long m = static_cast<long>(std::ceil(params.cutoff_nm / a)) + 1;
  const double cutoff2 = params.cutoff_nm * params.cutoff_nm;
  const double core2 = params.core_exclusion_nm * params.core_exclusion_nm;
  for (long ix = -m; ix <= m; ++ix)
    for (long iy = -m; iy <= m; ++iy)
      for (long iz = -m; iz <= m; ++iz)
        for (const Vec3& b : detail::diamond_basis()) {
          const Vec3 site =
              a * (Vec3(double(ix), double(iy), double(iz)) + b) +
              sensor.position_nm;
          const double r2 = (site - sensor.position_nm).squaredNorm();
          if (r2 > cutoff2 || r2 < core2) continue;
          if (detail::uniform_unit(rng) < params.abundance)
            bath.spins.push_back({site});
        }

  bath.hyperfine.reserve(bath.spins.size());
  bath.hyperfine_z.reserve(bath.spins.size());
  for (const BathSpin& s : bath.spins) {
    const DipolarTensor t = dipolar_tensor(s.position_nm - sensor.position_nm,
                                           sensor.gamma, params.gamma_n);
    const Vec3 v = bath.lambda * (t.tensor * bath.axis);
    bath.hyperfine.push_back(v);
    bath.hyperfine_z.push_back(v.dot(bath.axis));
  }
  enumerate_pairs(bath);
  return bath;
}

// Exact bifurcated evolution of one pair. In the zero-magnetization block the
// pair is a pseudospin with branch vectors (2b, 0, delta) / (2b, 0, 0); the
// stretched states are static and refocused by the balanced sequence, giving
// L_pair = (1 + overlap)/2.
inline double pair_cluster_coherence(const BathPair& pair,
                                     const PulseSequence& seq) {
  if (seq.total_time_us == 0.0) return 1.0;
  const std::array<double, 3> h_plus = {2.0 * pair.flip_flop, 0.0,
                                        pair.delta_hyperfine};
  const std::array<double, 3> h_zero = {2.0 * pair.flip_flop, 0.0, 0.0};
  double overlap;
  if (seq.family == Family::Cpmg) {
    overlap = cpmg_bifurcated_overlap(h_plus, h_zero, seq.pulses,
                                      seq.total_time_us);
  } else {
    Su2 up, u0;
    const std::vector<double> ds = segment_durations(seq);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const bool plus_first = (k % 2 == 0);
      up = su2_mul(su2_rotation(plus_first ? h_plus : h_zero, ds[k]), up);
      u0 = su2_mul(su2_rotation(plus_first ? h_zero : h_plus, ds[k]), u0);
    }
    overlap = su2_overlap(u0, up);
  }
  return 0.5 * (1.0 + overlap);
}

// CCE-1: a single secular spin only shifts with the sensor state; the
// balanced modulation integrates the shift to exactly zero.
inline double single_cluster_coherence(double hyperfine_z,
                                       const PulseSequence& seq) {
  double integral = 0.0;
  double prev = 0.0;
  double sign = 1.0;
  for (int k = 0; k <= seq.pulses; ++k) {
    const double next =
        (k < seq.pulses) ? seq.pulse_times_us[k] : seq.total_time_us;
    integral += sign * (next - prev);
    prev = next;
    sign = -sign;
  }
  return std::cos(0.5 * hyperfine_z * integral);
}

struct BathCurveMeta {
  int spin_count = 0;
  int pair_count = 0;
  int clamped_clusters = 0;
  // max |L_all_pairs - L_nearest_neighbor_pairs| over the grid
  double convergence_deviation = 0.0;
};

// L_bath(t) = prod_pairs L_pair / (L_i L_j). Parallel over time points; the
// pair product runs in index order, so results do not depend on thread count.
inline CoherenceCurve cce2_coherence(const BathRealization& bath, int pulses,
                                     const std::vector<double>& times_us,
                                     int threads = 1,
                                     BathCurveMeta* meta = nullptr,
                                     WarningLog* log = nullptr) {
  CoherenceCurve curve;
  curve.times_us = times_us;
  curve.values.assign(times_us.size(), 1.0);
  curve.engine = Engine::Exact;
  curve.descriptor = "cce2 bath, sensor " + bath.sensor_id;
  const double nn_cutoff = bath.params.lattice_nm * 0.485;  // bond ~ a*sqrt(3)/4
  std::vector<double> nn_values(times_us.size(), 1.0);
  std::atomic<int> clamped{0};
  parallel_for(times_us.size(), threads, [&](std::size_t idx) {
    const double t = times_us[idx];
    if (t == 0.0) return;
    const PulseSequence seq = cpmg_sequence(pulses, t);
    double l_all = 1.0, l_nn = 1.0;
    for (const BathPair& p : bath.pairs) {
      const double raw = pair_cluster_coherence(p, seq);
      const double sub = single_cluster_coherence(bath.hyperfine_z[p.i], seq) *
                         single_cluster_coherence(bath.hyperfine_z[p.j], seq);
      double contribution = raw;
      if (std::abs(sub) < 1e-12)
        clamped.fetch_add(1);
      else
        contribution = raw / sub;
      l_all *= contribution;
      if (p.separation_nm <= nn_cutoff) l_nn *= contribution;
    }
    curve.values[idx] = l_all;
    nn_values[idx] = l_nn;
  });
  if (meta) {
    meta->spin_count = static_cast<int>(bath.spins.size());
    meta->pair_count = static_cast<int>(bath.pairs.size());
    meta->clamped_clusters = clamped.load();
    double dev = 0.0;
    for (std::size_t i = 0; i < times_us.size(); ++i)
      dev = std::max(dev, std::abs(curve.values[i] - nn_values[i]));
    meta->convergence_deviation = dev;
  }
  if (clamped.load() > 0)
    warn(log, "cce2_coherence: " + std::to_string(clamped.load()) +
                  " cluster divisions clamped to raw value");
  return curve;
}

}  // namespace nvloc
