#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvloc/dipolar.hpp"
#include "nvloc/spin_algebra.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

struct WarningLog {
  std::vector<std::string> items;
  void add(std::string msg) { items.push_back(std::move(msg)); }
};

inline void warn(WarningLog* log, const std::string& msg) {
  if (log) log->add(msg);
}

struct SensorConfig {
  std::string id = "A";
  Vec3 position_nm = Vec3::Zero();
  Vec3 axis = Vec3(1, 1, 1).normalized();  // [111] by default
  double strain = 0.0;                     // rad/us
  double gamma = angular_from_mhz(kGammaNvMhzPerG);  // rad/(us*G), signed
  double zero_field_splitting = angular_from_mhz(kZeroFieldSplittingMhz);
};

inline void validate_sensor(SensorConfig& s, WarningLog* log = nullptr) {
  const double n = s.axis.norm();
  if (n < 1e-12)
    throw std::invalid_argument("sensor " + s.id + ": zero axis vector");
  s.axis /= n;
  if (s.strain < 0.0)
    throw std::invalid_argument("sensor " + s.id + ": strain must be >= 0");
  if (s.zero_field_splitting < 100.0 * s.strain)
    warn(log, "sensor " + s.id +
                  ": zero-field splitting not >> strain (Delta < 100 eps)");
}

struct FieldConfig {
  double magnitude_gauss = 0.0;
  std::optional<Vec3> direction;  // default: along each sensor's axis
};

// Field projected onto the sensor axis; off-axis components are dropped
// (secular approximation, the zero-field splitting dominates).
inline double parallel_field_gauss(const SensorConfig& s,
                                   const FieldConfig& f) {
  if (f.magnitude_gauss < 0.0)
    throw std::invalid_argument("field magnitude must be >= 0");
  if (!f.direction) return f.magnitude_gauss;
  const Vec3 dir = f.direction->normalized();
  return f.magnitude_gauss * std::abs(dir.dot(s.axis));
}

inline double nv_larmor(const SensorConfig& s, const FieldConfig& f) {
  return std::abs(s.gamma) * parallel_field_gauss(s, f);
}

// lambda = omega_NV / sqrt(eps^2 + omega_NV^2)
inline double renormalization_factor(double strain, double omega_nv) {
  if (strain == 0.0 && omega_nv == 0.0)
    throw std::invalid_argument(
        "renormalization_factor: strain and field both zero");
  return omega_nv / std::hypot(strain, omega_nv);
}

struct NVEigensystem {
  double e_plus = 0.0, e_zero = 0.0, e_minus = 0.0;  // rad/us
  Eigen::Vector3cd ket_plus, ket_minus;  // in the {|+1>,|0>,|-1>} basis
  double lambda = 1.0;
  double splitting = 0.0;  // |0> <-> |+> transition energy
};

// Eigensystem of Delta Sz^2 + eps (Sx^2 - Sy^2) + omega_NV Sz restricted to
// the {|+1>,|-1>} block. |+-> mix |+1> and |-1> through the strain; the
// (omega+Omega, eps) / (-eps, omega+Omega) form is stable for eps -> 0.
inline NVEigensystem nv_eigensystem(const SensorConfig& s,
                                    const FieldConfig& f) {
  const double omega = nv_larmor(s, f);
  const double eps = s.strain;
  const double gap = std::hypot(eps, omega);
  NVEigensystem out;
  out.e_plus = s.zero_field_splitting + gap;
  out.e_minus = s.zero_field_splitting - gap;
  out.e_zero = 0.0;
  out.splitting = out.e_plus;
  out.lambda = (gap == 0.0) ? 1.0 : omega / gap;
  const double u = omega + gap;
  const double norm = std::sqrt(u * u + eps * eps);
  if (norm == 0.0) {
    // eps = omega = 0: the |+-1> states are degenerate, keep them as-is.
    out.ket_plus << 1, 0, 0;
    out.ket_minus << 0, 0, 1;
    return out;
  }
  out.ket_plus << u / norm, 0, eps / norm;
  out.ket_minus << -eps / norm, 0, u / norm;
  return out;
}

struct TargetSpec {
  Vec3 position_nm = Vec3::Zero();
  double gamma = angular_from_mhz(kGammaNvMhzPerG);  // rad/(us*G)
};

// One effective two-level noise source seen by a sensor: dipolar components
// along/transverse to the sensor axis (before lambda scaling) and the free
// precession frequency of the source.
struct NoiseSource {
  std::string kind;
  double a_parallel = 0.0;  // rad/us
  double a_perp = 0.0;      // rad/us, >= 0
  double omega = 0.0;       // rad/us
};

inline NoiseSource target_noise_source(const SensorConfig& sensor,
                                       const FieldConfig& field,
                                       const TargetSpec& target) {
  const Vec3 r = target.position_nm - sensor.position_nm;
  const DipolarTensor t = dipolar_tensor(r, sensor.gamma, target.gamma);
  NoiseSource src;
  src.kind = "target";
  src.a_parallel = axial_component(t.tensor, sensor.axis);
  src.a_perp = transverse_component(t.tensor, sensor.axis);
  src.omega = std::abs(target.gamma) * parallel_field_gauss(sensor, field);
  return src;
}

struct EffectiveBystander {
  NoiseSource source;
  double flip_flop_coupling = 0.0;  // rad/us
  bool flip_flop_suppressed = true;
};

// A bystander sensor acts on the probed sensor as an effective spin-1/2:
// its |+> <-> |-> transition at 2*sqrt(eps_j^2 + omega_NV^2) carries the
// only nearby noise frequency, with Sz matrix elements lambda_j (diagonal)
// and -eps_j/Omega_j (off-diagonal) in the renormalized basis. Flip-flops
// between the sensors are frozen out when the strain mismatch dominates the
// dipolar coupling.
inline EffectiveBystander effective_bystander_spin(const SensorConfig& sensor,
                                                   const SensorConfig& other,
                                                   const FieldConfig& field,
                                                   WarningLog* log = nullptr) {
  const Vec3 r = other.position_nm - sensor.position_nm;
  const DipolarTensor t = dipolar_tensor(r, sensor.gamma, other.gamma);
  const double a_zz = axial_component(t.tensor, sensor.axis);

  const double omega_j = nv_larmor(other, field);
  const double gap_j = std::hypot(other.strain, omega_j);
  const double lambda_j = (gap_j == 0.0) ? 1.0 : omega_j / gap_j;
  const double mix_j = (gap_j == 0.0) ? 0.0 : other.strain / gap_j;

  EffectiveBystander out;
  out.source.kind = "bystander:" + other.id;
  out.source.omega = 2.0 * gap_j;
  out.source.a_parallel = 2.0 * lambda_j * a_zz;
  out.source.a_perp = std::abs(2.0 * mix_j * a_zz);
  // Secular like-spin flip-flop amplitude |A_zz|/4.
  out.flip_flop_coupling = std::abs(a_zz) / 4.0;
  const double strain_gap = std::abs(sensor.strain - other.strain);
  out.flip_flop_suppressed = strain_gap > 10.0 * out.flip_flop_coupling;
  if (!out.flip_flop_suppressed)
    warn(log, "sensors " + sensor.id + "," + other.id +
                  ": strain mismatch does not suppress flip-flops");
  return out;
}

// Conditional environment Hamiltonians for the |0> <-> |+> sensor transition,
// plus the noise operator and free Hamiltonian driving the bifurcated
// evolution. The environment is (target) x (bystander effective spins).
struct DephasingModel {
  int dim = 1;
  double lambda = 1.0;
  double gap = 0.0;  // sqrt(eps^2 + omega_NV^2), rad/us
  bool quadratic = false;
  std::vector<NoiseSource> sources;
  ComplexMatrix h_plus, h_zero;  // conditional Hamiltonians (environment)
  ComplexMatrix beta, h_free;    // noise operator, free Hamiltonian
};

inline DephasingModel build_dephasing_model(
    const SensorConfig& sensor, const FieldConfig& field,
    const std::optional<TargetSpec>& target,
    const std::vector<SensorConfig>& bystanders, bool quadratic_term = false,
    WarningLog* log = nullptr) {
  DephasingModel model;
  const double omega_nv = nv_larmor(sensor, field);
  model.gap = std::hypot(sensor.strain, omega_nv);
  model.lambda = (model.gap == 0.0) ? 1.0 : omega_nv / model.gap;
  model.quadratic = quadratic_term;

  if (target) {
    const NoiseSource src = target_noise_source(sensor, field, *target);
    const double norm = std::hypot(src.a_parallel, src.a_perp);
    if (src.omega > 0.0 && norm > 0.2 * src.omega)
      warn(log, "sensor " + sensor.id +
                    ": target coupling beyond the weak-coupling regime");
    model.sources.push_back(src);
  }
  for (const SensorConfig& b : bystanders)
    model.sources.push_back(
        effective_bystander_spin(sensor, b, field, log).source);

  const int n = static_cast<int>(model.sources.size());
  model.dim = 1 << n;
  ComplexMatrix h_env = ComplexMatrix::Zero(model.dim, model.dim);
  ComplexMatrix h_noise = ComplexMatrix::Zero(model.dim, model.dim);
  const SpinOperators half = spin_operators(0.5);
  const ComplexMatrix eye2 = ComplexMatrix::Identity(2, 2);
  for (int i = 0; i < n; ++i) {
    std::vector<ComplexMatrix> fx(n, eye2), fz(n, eye2);
    fx[i] = half.sx;
    fz[i] = half.sz;
    const ComplexMatrix sx = (n == 1) ? half.sx : kron_all(fx);
    const ComplexMatrix sz = (n == 1) ? half.sz : kron_all(fz);
    h_env += model.sources[i].omega * sz;
    h_noise += model.sources[i].a_perp * sx + model.sources[i].a_parallel * sz;
  }

  model.h_zero = h_env;
  model.beta = model.lambda * h_noise;
  if (quadratic_term && model.gap > 0.0)
    model.beta += h_noise * h_noise / (2.0 * model.gap);
  model.h_plus = model.h_zero + model.beta +
                 model.gap * ComplexMatrix::Identity(model.dim, model.dim);
  model.h_free = model.h_zero + 0.5 * model.beta;
  return model;
}

}  // namespace nvloc
