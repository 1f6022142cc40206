#pragma once

#include <array>
#include <cmath>

// SU(2) propagator algebra for two-level environments.
//
// Every traceless two-level Hamiltonian is H = h.S with S = sigma/2, and its
// propagator exp(-i H dt) = w*I - i*(v.sigma) is a unit quaternion (w, v).
// Products, powers and branch overlaps then reduce to quaternion arithmetic,
// which keeps the bifurcated evolution O(1) per CPMG sequence instead of
// O(pulses) dense matrix products.

namespace nvloc {

struct Su2 {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline Su2 su2_mul(const Su2& a, const Su2& b) {
  return Su2{a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
             a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
             a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
             a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// exp(-i (h.S) dt) with S = sigma/2: rotation by |h|*dt about h.
inline Su2 su2_rotation(const std::array<double, 3>& h, double dt) {
  const double hn = std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
  if (hn == 0.0) return Su2{};
  const double ang = 0.5 * hn * dt;
  const double s = std::sin(ang) / hn;
  return Su2{std::cos(ang), s * h[0], s * h[1], s * h[2]};
}

inline Su2 su2_pow(const Su2& q, long m) {
  const double vn = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  if (vn < 1e-300) {
    const bool flip = (q.w < 0.0) && (m % 2 != 0);
    return Su2{flip ? -1.0 : 1.0, 0.0, 0.0, 0.0};
  }
  const double phi = std::atan2(vn, q.w);
  const double s = std::sin(m * phi) / vn;
  return Su2{std::cos(m * phi), s * q.x, s * q.y, s * q.z};
}

// (1/2) Re Tr[a^dag b]; for unit quaternions this is their dot product.
inline double su2_overlap(const Su2& a, const Su2& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// Bifurcated CPMG-N evolution of a two-level environment.
//
// Branch Hamiltonians are h_plus.S and h_zero.S. The first interval (length
// tau = t/2N) evolves the "+" branch under h_plus and the "0" branch under
// h_zero; each pulse swaps the roles. Returns (1/2) Re Tr[U0^dag Uplus].
inline double cpmg_bifurcated_overlap(const std::array<double, 3>& h_plus,
                                      const std::array<double, 3>& h_zero,
                                      int pulses, double total_time) {
  if (total_time == 0.0) return 1.0;
  const double tau = total_time / (2.0 * pulses);
  const Su2 p1 = su2_rotation(h_plus, tau);
  const Su2 z1 = su2_rotation(h_zero, tau);
  const Su2 p2 = su2_rotation(h_plus, 2.0 * tau);
  const Su2 z2 = su2_rotation(h_zero, 2.0 * tau);

  // CPMG-2 unit, applied right to left: tau(+), 2tau(-), tau(+).
  const Su2 vp = su2_mul(p1, su2_mul(z2, p1));
  const Su2 v0 = su2_mul(z1, su2_mul(p2, z1));

  Su2 up, u0;
  if (pulses % 2 == 0) {
    up = su2_pow(vp, pulses / 2);
    u0 = su2_pow(v0, pulses / 2);
  } else {
    // Odd N: one Hahn unit tau(+), tau(-) on top of (N-1)/2 CPMG-2 units.
    const Su2 yp = su2_mul(z1, p1);
    const Su2 y0 = su2_mul(p1, z1);
    up = su2_mul(yp, su2_pow(vp, (pulses - 1) / 2));
    u0 = su2_mul(y0, su2_pow(v0, (pulses - 1) / 2));
  }
  return su2_overlap(u0, up);
}

}  // namespace nvloc
