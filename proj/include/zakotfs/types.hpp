#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace zakotfs {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 2.998e8;
inline constexpr Complex kJ{0.0, 1.0};

// e^{j 2π x}
inline Complex cis2pi(double x) {
  const double a = 2.0 * kPi * x;
  return {std::cos(a), std::sin(a)};
}

}  // namespace zakotfs
