#pragma once

#include <cmath>
#include <numbers>

// Unit conventions used throughout:
//   length          nm
//   time            us
//   magnetic field  gauss
//   frequency       rad/us (angular) everywhere inside the library
//
// Tabulated values (zero-field splitting, gyromagnetic ratios, strain) are
// linear frequencies in MHz or MHz/G and are multiplied by 2*pi on ingestion.

namespace nvloc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 1 MHz = 1/us, so linear MHz -> rad/us is a bare 2*pi factor.
constexpr double angular_from_mhz(double mhz) { return kTwoPi * mhz; }
constexpr double mhz_from_angular(double omega) { return omega / kTwoPi; }

constexpr double rad_from_deg(double deg) { return deg * kPi / 180.0; }
constexpr double deg_from_rad(double rad) { return rad * 180.0 / kPi; }

// NV ground-state zero-field splitting, linear MHz.
inline constexpr double kZeroFieldSplittingMhz = 2870.0;
// NV electron gyromagnetic ratio, linear MHz per gauss (signed).
inline constexpr double kGammaNvMhzPerG = -2.8;
// 13C nuclear gyromagnetic ratio, linear MHz per gauss.
inline constexpr double kGammaC13MhzPerG = 1.0705e-3;

// mu0/(4*pi) * hbar collapsed into the working units: multiplying by
// gamma1*gamma2 [rad/(us*G)]^2 / R^3 [nm^3] yields a coupling in rad/us.
// Numerically equal to hbar in J*s times 1e34 (CODATA).
inline constexpr double kDipolarCoeffNm3 = 1.054571817;

// Diamond conventional lattice constant, nm.
inline constexpr double kDiamondLatticeNm = 0.357;
// Natural 13C abundance.
inline constexpr double kNaturalAbundanceC13 = 0.011;

}  // namespace nvloc
