#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace subrad {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;

// Lengths are measured in units of the transition wavelength, so the
// resonant wavenumber is 2*pi. Rates are in units of the single-atom decay
// rate and times in its inverse.
inline constexpr double kResonantWavenumber = 2.0 * kPi;

// Largest atom number handled by the 2^N state-vector and density-matrix
// backends.
inline constexpr int kDenseAtomCap = 12;

// Largest atom number handled by the cumulant backend.
inline constexpr int kCumulantAtomCap = 40;

} // namespace subrad
