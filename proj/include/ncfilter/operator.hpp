#pragma once

// Dense complex operators for small Hilbert spaces and the Lindblad
// superoperators built on them.
//
// Conventions used everywhere in the library:
//   * two-level basis ordered (|0> ground, |1> excited), sigma_minus = |0><1|
//   * extended spaces are laid out system (x) ancilla, so the composite index
//     of (system i, ancilla a) is i * 2 + a.

#include <Eigen/Dense>

#include <complex>

#include "ncfilter/error.hpp"

namespace ncfilter {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};

// Tolerances for exact and compound identities at double precision, d <= 8.
inline constexpr double kExactTol = 1e-12;
inline constexpr double kCompoundTol = 1e-10;

/// Open-system parameters (H, L, S) acting on the system space.
///
/// H must be Hermitian and S unitary; construction through make() checks both.
struct SystemModel {
  Operator H;
  Operator L;
  Operator S;

  int dim() const { return static_cast<int>(H.rows()); }

  static SystemModel make(Operator H, Operator L, Operator S);
  /// L = sqrt(kappa) sigma_minus, S = I, H = 0.
  static SystemModel two_level_decay(double kappa);
};

Operator sigma_minus();
Operator sigma_plus();
Operator identity(int dim);
/// |k><k| in dimension dim.
Operator projector(int dim, int k);

double max_abs(const Operator& A);
bool is_finite(const Operator& A);
bool is_hermitian(const Operator& A, double tol = kExactTol);
cplx trace(const Operator& A);

Operator commutator(const Operator& A, const Operator& B);

/// -i[H, rho] + L rho L^+ - 1/2 {L^+ L, rho}
Operator lindblad_apply(const SystemModel& model, const Operator& rho);
/// i[H, X] + L^+ X L - 1/2 {L^+ L, X}
Operator adjoint_lindblad_apply(const SystemModel& model, const Operator& X);

Operator kron(const Operator& A, const Operator& B);

/// Tr_A over the trailing two-level ancilla factor.
Operator partial_trace_ancilla(const Operator& rho_ext, int sys_dim);

/// Tr_A[(I (x) left) rho_ext (I (x) right)] for 2x2 ancilla operators.
Operator ancilla_sandwich(const Operator& rho_ext, const Operator& left,
                          const Operator& right);

void require_same_dim(const Operator& A, const Operator& B, const char* where);
void require_square(const Operator& A, const char* where);

}  // namespace ncfilter
