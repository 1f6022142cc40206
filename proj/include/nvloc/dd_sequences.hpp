#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvloc/units.hpp"

namespace nvloc {

enum class Family { Cpmg };

struct PulseSequence {
  Family family = Family::Cpmg;
  int pulses = 1;
  double total_time_us = 0.0;
  std::vector<double> pulse_times_us;
  std::string alias;  // set when constructed through an alias, e.g. "xy8-4"
};

// CPMG-N: pi pulses at t_k = (2k-1) t / (2N), pulse delay 2*tau = t/N.
inline PulseSequence cpmg_sequence(int pulses, double total_time_us) {
  if (pulses < 1) throw std::invalid_argument("cpmg_sequence: N must be >= 1");
  if (total_time_us <= 0.0)
    throw std::invalid_argument("cpmg_sequence: total time must be > 0");
  PulseSequence seq;
  seq.pulses = pulses;
  seq.total_time_us = total_time_us;
  seq.pulse_times_us.resize(pulses);
  for (int k = 1; k <= pulses; ++k)
    seq.pulse_times_us[k - 1] =
        (2.0 * k - 1.0) * total_time_us / (2.0 * pulses);
  return seq;
}

// XY8-k shares the CPMG-8k timing; pulse axes are not modeled (ideal pulses).
inline PulseSequence xy8_sequence(int k, double total_time_us) {
  PulseSequence seq = cpmg_sequence(8 * k, total_time_us);
  seq.alias = "xy8-" + std::to_string(k);
  return seq;
}

// f(t') = (-1)^k on [t_k, t_{k+1}); right-continuous at pulse times.
inline int modulation_sign(const PulseSequence& seq, double t_prime) {
  if (t_prime < 0.0 || t_prime > seq.total_time_us)
    throw std::invalid_argument("modulation_sign: time outside [0, t]");
  const auto& ts = seq.pulse_times_us;
  const auto it = std::upper_bound(ts.begin(), ts.end(), t_prime);
  const auto flips = static_cast<long>(it - ts.begin());
  return (flips % 2 == 0) ? 1 : -1;
}

inline std::vector<double> segment_durations(const PulseSequence& seq) {
  std::vector<double> ds;
  ds.reserve(seq.pulses + 1);
  if (seq.family == Family::Cpmg) {
    const double tau = seq.total_time_us / (2.0 * seq.pulses);
    ds.push_back(tau);
    for (int k = 1; k < seq.pulses; ++k) ds.push_back(2.0 * tau);
    ds.push_back(tau);
    return ds;
  }
  double prev = 0.0;
  for (double t : seq.pulse_times_us) {
    ds.push_back(t - prev);
    prev = t;
  }
  ds.push_back(seq.total_time_us - prev);
  return ds;
}

// F(w,t) = | sum_k (-1)^k (e^{i w t_{k+1}} - e^{i w t_k}) |, t_0=0, t_{N+1}=t.
inline double filter_direct(const PulseSequence& seq, double omega) {
  std::complex<double> sum = 0.0;
  double t_prev = 0.0;
  double sign = 1.0;
  for (int k = 0; k <= seq.pulses; ++k) {
    const double t_next =
        (k < seq.pulses) ? seq.pulse_times_us[k] : seq.total_time_us;
    sum += sign * (std::exp(std::complex<double>(0, omega * t_next)) -
                   std::exp(std::complex<double>(0, omega * t_prev)));
    t_prev = t_next;
    sign = -sign;
  }
  return std::abs(sum);
}

// Closed-form CPMG filter, 4 sin^2(wt/4N) |cos(wt/2) / cos(wt/2N)| for odd N
// and the sin(wt/2) variant for even N. The cos(wt/2N) zeros are removable;
// near them both parities reduce exactly to |sin(N d)/sin(d)| with
// d = wt/2N - nearest odd multiple of pi/2, which evaluates stably and gives
// F = 2N at the dip condition wt = pi N (2q-1).
inline double filter_cpmg_closed(int pulses, double total_time_us,
                                 double omega) {
  const double n = pulses;
  const double x = omega * total_time_us / (2.0 * n);
  const double half = std::sin(0.5 * x);
  const double envelope = 4.0 * half * half;
  const double cx = std::cos(x);
  double osc;
  if (std::abs(cx) < 1e-6) {
    const double j = std::round(x / kPi - 0.5);
    const double d = x - (2.0 * j + 1.0) * 0.5 * kPi;
    osc = (d == 0.0) ? n : std::abs(std::sin(n * d) / std::sin(d));
  } else {
    const double num =
        (pulses % 2 == 1) ? std::cos(n * x) : std::sin(n * x);
    osc = std::abs(num / cx);
  }
  return envelope * osc;
}

inline double filter_function(const PulseSequence& seq, double omega) {
  if (seq.family == Family::Cpmg)
    return filter_cpmg_closed(seq.pulses, seq.total_time_us, omega);
  return filter_direct(seq, omega);
}

}  // namespace nvloc
