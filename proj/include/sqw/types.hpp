#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace sqw {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Dense edge-basis dimension cap.
inline constexpr Eigen::Index kMaxBasisDim = 4096;

// Resolvent operations refuse z with ||z| - 1| <= kGuardBand.
inline constexpr double kGuardBand = 1e-6;

}  // namespace sqw
