#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvloc/dd_sequences.hpp"
#include "nvloc/nv_hamiltonian.hpp"
#include "nvloc/parallel.hpp"
#include "nvloc/su2.hpp"

namespace nvloc {

enum class Engine { Magnus, Exact, Semiclassical };

inline std::string engine_name(Engine e) {
  switch (e) {
    case Engine::Magnus: return "magnus";
    case Engine::Exact: return "exact";
    case Engine::Semiclassical: return "semiclassical";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Noise spectra and the semiclassical Gaussian engine
// ---------------------------------------------------------------------------

struct SpectralLine {
  double omega = 0.0;   // rad/us
  double weight = 0.0;  // (rad/us)^2 spectral area, >= 0
};

struct NoiseSpectrum {
  std::vector<SpectralLine> lines;  // stored symmetrically in +-omega
  std::function<double(double)> continuous;  // optional sampler C(w)
  double continuous_cutoff = 0.0;
  int continuous_samples = 0;
};

// Delta-line spectrum of a precessing two-level source: lines at
// +-(omega_e + lambda a_par / 2), each of weight (pi/4)(lambda a_perp)^2.
inline NoiseSpectrum target_noise_spectrum(double a_parallel, double a_perp,
                                           double lambda, double omega_e,
                                           WarningLog* log = nullptr) {
  NoiseSpectrum spec;
  if (omega_e > 0.0 && std::hypot(a_parallel, a_perp) > 0.2 * omega_e)
    warn(log, "target_noise_spectrum: coupling not << Larmor frequency");
  if (a_perp == 0.0) return spec;
  const double shifted = omega_e + 0.5 * lambda * a_parallel;
  const double w = 0.25 * kPi * lambda * a_perp * lambda * a_perp;
  spec.lines.push_back({shifted, w});
  spec.lines.push_back({-shifted, w});
  return spec;
}

// L = exp[-(1/4pi) integral C(w) F^2(w,t)/w^2 dw]; exact sum for lines.
inline double coherence_semiclassical(const NoiseSpectrum& spec,
                                      const PulseSequence& seq) {
  double chi = 0.0;
  for (const SpectralLine& line : spec.lines) {
    if (std::abs(line.omega) < 1e-12)
      throw std::invalid_argument(
          "coherence_semiclassical: DC line must be removed before use");
    const double f = filter_function(seq, line.omega);
    chi += line.weight * f * f / (4.0 * kPi * line.omega * line.omega);
  }
  if (spec.continuous && spec.continuous_samples > 0) {
    // midpoint rule over [-cutoff, cutoff]; an even sample count keeps the
    // grid away from w = 0
    const int m = spec.continuous_samples + (spec.continuous_samples % 2);
    const double h = 2.0 * spec.continuous_cutoff / m;
    for (int i = 0; i < m; ++i) {
      const double w = -spec.continuous_cutoff + (i + 0.5) * h;
      if (std::abs(w) < 1e-12) continue;
      const double f = filter_function(seq, w);
      chi += spec.continuous(w) * f * f / (4.0 * kPi * w * w) * h;
    }
  }
  return std::exp(-chi);
}

// ---------------------------------------------------------------------------
// First-order Magnus closed form
// ---------------------------------------------------------------------------

inline double coherence_magnus(double a_parallel, double a_perp, double lambda,
                               double omega_e, const PulseSequence& seq) {
  const double shifted = omega_e + 0.5 * lambda * a_parallel;
  if (shifted <= 0.0)
    throw std::invalid_argument("coherence_magnus: shifted frequency <= 0");
  if (a_perp == 0.0) return 1.0;
  const double f = filter_function(seq, shifted);
  return std::cos(0.5 * lambda * a_perp / shifted * f);
}

// ---------------------------------------------------------------------------
// Exact bifurcated quantum evolution
// ---------------------------------------------------------------------------

inline constexpr int kMaxExactDim = 4096;

// Dense branch evolution: alternating exp(-i (H0 -+ beta/2) dt) products with
// propagators cached per distinct interval length (CPMG has two: tau, 2tau).
inline std::complex<double> coherence_quantum_exact_dense(
    const DephasingModel& model, const PulseSequence& seq) {
  if (model.dim > kMaxExactDim)
    throw std::invalid_argument(
        "coherence_quantum_exact: environment dimension " +
        std::to_string(model.dim) + " exceeds " +
        std::to_string(kMaxExactDim));
  if (seq.total_time_us == 0.0) return 1.0;
  const ComplexMatrix hp = model.h_free + 0.5 * model.beta;
  const ComplexMatrix hm = model.h_free - 0.5 * model.beta;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> esp(hp), esm(hm);
  auto segment = [&](const Eigen::SelfAdjointEigenSolver<ComplexMatrix>& es,
                     double dt) {
    Eigen::VectorXcd ph(model.dim);
    for (int i = 0; i < model.dim; ++i)
      ph(i) = std::exp(std::complex<double>(0, -es.eigenvalues()(i) * dt));
    return ComplexMatrix(es.eigenvectors() * ph.asDiagonal() *
                         es.eigenvectors().adjoint());
  };
  std::map<double, std::pair<ComplexMatrix, ComplexMatrix>> cache;
  ComplexMatrix u_plus = ComplexMatrix::Identity(model.dim, model.dim);
  ComplexMatrix u_zero = u_plus;
  const std::vector<double> durations = segment_durations(seq);
  for (std::size_t k = 0; k < durations.size(); ++k) {
    auto it = cache.find(durations[k]);
    if (it == cache.end())
      it = cache
               .emplace(durations[k],
                        std::make_pair(segment(esp, durations[k]),
                                       segment(esm, durations[k])))
               .first;
    const bool plus_first = (k % 2 == 0);
    u_plus = (plus_first ? it->second.first : it->second.second) * u_plus;
    u_zero = (plus_first ? it->second.second : it->second.first) * u_zero;
  }
  return (u_zero.adjoint() * u_plus).trace() / double(model.dim);
}

// Without the quadratic term the sources act on disjoint spin-1/2 factors,
// so the trace factorizes exactly into per-source SU(2) overlaps.
inline double coherence_quantum_exact(const DephasingModel& model,
                                      const PulseSequence& seq) {
  if (seq.total_time_us == 0.0) return 1.0;
  if (model.quadratic || seq.family != Family::Cpmg)
    return coherence_quantum_exact_dense(model, seq).real();
  double l = 1.0;
  for (const NoiseSource& src : model.sources) {
    const std::array<double, 3> h_plus = {model.lambda * src.a_perp, 0.0,
                                          src.omega +
                                              model.lambda * src.a_parallel};
    const std::array<double, 3> h_zero = {0.0, 0.0, src.omega};
    l *= cpmg_bifurcated_overlap(h_plus, h_zero, seq.pulses,
                                 seq.total_time_us);
  }
  return l;
}

// ---------------------------------------------------------------------------
// Dip predictors
// ---------------------------------------------------------------------------

inline double dip_time(int pulses, int order, double omega_e, double lambda,
                       double a_parallel) {
  const double shifted = omega_e + 0.5 * lambda * a_parallel;
  if (shifted <= 0.0)
    throw std::invalid_argument("dip_time: shifted frequency <= 0");
  return kPi * (2.0 * order - 1.0) * pulses / shifted;
}

enum class DipMode { Quantum, Semiclassical };

inline double dip_depth(int pulses, double a_parallel, double a_perp,
                        double lambda, double omega_e, DipMode mode) {
  const double shifted = omega_e + 0.5 * lambda * a_parallel;
  if (shifted <= 0.0)
    throw std::invalid_argument("dip_depth: shifted frequency <= 0");
  const double x = lambda * a_perp * pulses / shifted;
  return mode == DipMode::Quantum ? std::cos(x) : std::exp(-0.5 * x * x);
}

// ---------------------------------------------------------------------------
// Curve sampling
// ---------------------------------------------------------------------------

struct CoherenceCurve {
  std::vector<double> times_us;
  std::vector<double> values;
  std::string descriptor;
  Engine engine = Engine::Exact;
};

struct Scenario {
  SensorConfig sensor;
  FieldConfig field;
  std::optional<TargetSpec> target;
  std::vector<SensorConfig> bystanders;
  bool quadratic = false;
  std::string descriptor;
};

inline NoiseSpectrum scenario_spectrum(const DephasingModel& model) {
  NoiseSpectrum spec;
  for (const NoiseSource& src : model.sources) {
    if (src.a_perp == 0.0) continue;
    const double shifted = src.omega + 0.5 * model.lambda * src.a_parallel;
    const double w = 0.25 * kPi * model.lambda * src.a_perp * model.lambda *
                     src.a_perp;
    spec.lines.push_back({shifted, w});
    spec.lines.push_back({-shifted, w});
  }
  return spec;
}

inline CoherenceCurve coherence_curve(const Scenario& scenario, int pulses,
                                      const std::vector<double>& times_us,
                                      Engine engine, int threads = 1,
                                      WarningLog* log = nullptr) {
  for (std::size_t i = 1; i < times_us.size(); ++i)
    if (times_us[i] <= times_us[i - 1])
      throw std::invalid_argument("coherence_curve: time grid not increasing");
  const DephasingModel model =
      build_dephasing_model(scenario.sensor, scenario.field, scenario.target,
                            scenario.bystanders, scenario.quadratic, log);
  const NoiseSpectrum spec =
      engine == Engine::Semiclassical ? scenario_spectrum(model)
                                      : NoiseSpectrum{};
  CoherenceCurve curve;
  curve.times_us = times_us;
  curve.values.assign(times_us.size(), 1.0);
  curve.descriptor = scenario.descriptor;
  curve.engine = engine;
  parallel_for(times_us.size(), threads, [&](std::size_t i) {
    const double t = times_us[i];
    if (t == 0.0) return;  // L(0) = 1 in every engine
    const PulseSequence seq = cpmg_sequence(pulses, t);
    switch (engine) {
      case Engine::Exact:
        curve.values[i] = coherence_quantum_exact(model, seq);
        break;
      case Engine::Magnus: {
        double l = 1.0;
        for (const NoiseSource& src : model.sources)
          l *= coherence_magnus(src.a_parallel, src.a_perp, model.lambda,
                                src.omega, seq);
        curve.values[i] = l;
        break;
      }
      case Engine::Semiclassical:
        curve.values[i] = coherence_semiclassical(spec, seq);
        break;
    }
  });
  return curve;
}

// Independent-environment factorization: pointwise product of two curves on
// the same grid (target/bystander contribution times the bath contribution).
inline CoherenceCurve combine_curves(const CoherenceCurve& a,
                                     const CoherenceCurve& b) {
  if (a.times_us != b.times_us)
    throw std::invalid_argument("combine_curves: time grids differ");
  CoherenceCurve out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] *= b.values[i];
  return out;
}

}  // namespace nvloc
