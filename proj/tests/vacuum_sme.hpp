#pragma once
// Textbook vacuum-input filters written out directly with Eigen, used as an
// independent reference for the reduced filters when the field carries no
// photons.

#include <Eigen/Dense>
#include <complex>

namespace vacuum_sme {

using Mat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

inline Mat lindblad(const Mat& H, const Mat& L, const Mat& r) {
  const cplx I(0.0, 1.0);
  const Mat LdL = L.adjoint() * L;
  return -I * (H * r - r * H) + L * r * L.adjoint() - 0.5 * (LdL * r + r * LdL);
}

inline double intensity(const Mat& L, const Mat& r) {
  return (L.adjoint() * L * r).trace().real();
}

/// One counting step; returns the intensity used.
inline double counting_step(const Mat& H, const Mat& L, Mat& r, double dt, bool jump) {
  const double k = intensity(L, r);
  if (jump) {
    r = L * r * L.adjoint() / k;
  } else {
    r = r + dt * (lindblad(H, L, r) - L * r * L.adjoint() + k * r);
    r /= r.trace().real();
  }
  return k;
}

/// One homodyne step; returns the quadrature rate used.
inline double homodyne_step(const Mat& H, const Mat& L, Mat& r, double dt, double dW) {
  const double v = ((L + L.adjoint()) * r).trace().real();
  r = r + dt * lindblad(H, L, r) + dW * (L * r + r * L.adjoint() - v * r);
  r /= r.trace().real();
  return v;
}

}  // namespace vacuum_sme
