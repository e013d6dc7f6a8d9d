#pragma once

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "ncfilter/envelope.hpp"
#include "ncfilter/operator.hpp"

namespace testutil {

using ncfilter::cplx;
using ncfilter::Operator;

inline Operator random_matrix(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Operator A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = cplx(n(rng), n(rng));
  return A;
}

inline Operator random_hermitian(std::mt19937_64& rng, int d, double scale = 1.0) {
  const Operator A = random_matrix(rng, d, scale);
  return 0.5 * (A + A.adjoint());
}

inline Operator random_density(std::mt19937_64& rng, int d) {
  const Operator A = random_matrix(rng, d);
  Operator rho = A * A.adjoint();
  return rho / rho.trace().real();
}

inline Operator random_unitary(std::mt19937_64& rng, int d) {
  Eigen::HouseholderQR<Operator> qr(random_matrix(rng, d));
  return qr.householderQ() * Operator::Identity(d, d);
}

inline ncfilter::SystemModel random_model(std::mt19937_64& rng, int d,
                                          double l_scale = 0.5) {
  return ncfilter::SystemModel::make(random_hermitian(rng, d, 0.5),
                                     random_matrix(rng, d, l_scale),
                                     random_unitary(rng, d));
}

/// PSD 2x2 coefficient matrix with unit trace and a non-trivial coherence.
inline ncfilter::GammaMatrix random_gamma(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);
  ncfilter::GammaMatrix g;
  g.g11 = u(rng);
  g.g00 = 1.0 - g.g11;
  g.g01 = 0.9 * std::sqrt(g.g00 * g.g11) * std::polar(u(rng), ph(rng));
  return g;
}

/// State-like random hierarchy matrix set with the structure the filters
/// preserve: Hermitian rho_S / rho_mp and rho_plus = rho_minus^+.
inline std::vector<Operator> random_cascade(std::mt19937_64& rng, int d) {
  const Operator m = random_matrix(rng, d, 0.3);
  return {random_density(rng, d), m, m.adjoint(), 0.5 * random_density(rng, d)};
}


}  // namespace testutil
