#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "nvloc/spin_algebra.hpp"
#include "nvloc/units.hpp"

namespace nvloc {

// Magnetic point-dipole coupling tensor between two spins, rad/us.
// Symmetric, traceless, and falls off as R^-3.
struct DipolarTensor {
  Eigen::Matrix3d tensor;  // rad/us
  double gamma1 = 0.0;     // rad/(us*G)
  double gamma2 = 0.0;
  Vec3 displacement_nm = Vec3::Zero();
};

inline DipolarTensor dipolar_tensor(const Vec3& r_nm, double gamma1,
                                    double gamma2) {
  const double r = r_nm.norm();
  if (r < 1e-12)
    throw std::invalid_argument("dipolar_tensor: zero displacement");
  const Vec3 n = r_nm / r;
  const double c = kDipolarCoeffNm3 * gamma1 * gamma2 / (r * r * r);
  DipolarTensor out;
  out.tensor = c * (Eigen::Matrix3d::Identity() - 3.0 * n * n.transpose());
  out.gamma1 = gamma1;
  out.gamma2 = gamma2;
  out.displacement_nm = r_nm;
  return out;
}

// axis . A . axis
inline double axial_component(const Eigen::Matrix3d& tensor,
                              const Vec3& axis) {
  return axis.dot(tensor * axis);
}

// |axis . A  -  (axis . A . axis) axis|
inline double transverse_component(const Eigen::Matrix3d& tensor,
                                   const Vec3& axis) {
  const Vec3 row = tensor * axis;
  return (row - axial_component(tensor, axis) * axis).norm();
}

struct DipolarComponents {
  double a_parallel = 0.0;  // rad/us, signed
  double a_perp = 0.0;      // rad/us, >= 0
};

// Renormalized secular dipolar components seen by a strained sensor for a
// source at distance r and zenith angle theta from the sensor axis.
inline DipolarComponents dipolar_components(double r_nm, double theta_rad,
                                            double gamma1, double gamma2,
                                            double lambda) {
  if (r_nm <= 0.0)
    throw std::invalid_argument("dipolar_components: distance must be > 0");
  if (theta_rad < 0.0 || theta_rad > kPi)
    throw std::invalid_argument("dipolar_components: theta outside [0, pi]");
  const double c =
      kDipolarCoeffNm3 * gamma1 * gamma2 * lambda / (r_nm * r_nm * r_nm);
  const double ct = std::cos(theta_rad);
  const double st = std::sin(theta_rad);
  DipolarComponents out;
  out.a_parallel = c * (1.0 - 3.0 * ct * ct);
  out.a_perp = std::abs(c * 3.0 * st * ct);
  return out;
}

}  // namespace nvloc
