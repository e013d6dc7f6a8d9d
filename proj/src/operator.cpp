#include "ncfilter/operator.hpp"

#include <cmath>
#include <string>

namespace ncfilter {

void require_square(const Operator& A, const char* where) {
  if (A.rows() != A.cols() || A.rows() < 1)
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": operator must be square with dim >= 1");
}

void require_same_dim(const Operator& A, const Operator& B, const char* where) {
  require_square(A, where);
  require_square(B, where);
  if (A.rows() != B.rows())
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": dimension mismatch (" +
             std::to_string(A.rows()) + " vs " + std::to_string(B.rows()) + ")");
}

SystemModel SystemModel::make(Operator H, Operator L, Operator S) {
  require_same_dim(H, L, "SystemModel");
  require_same_dim(H, S, "SystemModel");
  if (!is_finite(H) || !is_finite(L) || !is_finite(S))
    fail(ErrorCode::invalid_argument, "SystemModel: non-finite entries");
  if (!is_hermitian(H, 1e-12))
    fail(ErrorCode::invalid_argument, "SystemModel: H is not Hermitian");
  const Operator unit = S.adjoint() * S - identity(static_cast<int>(S.rows()));
  if (max_abs(unit) > 1e-10)
    fail(ErrorCode::invalid_argument, "SystemModel: S is not unitary");
  return SystemModel{std::move(H), std::move(L), std::move(S)};
}

SystemModel SystemModel::two_level_decay(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    fail(ErrorCode::invalid_argument, "two-level-decay: kappa must be > 0");
  return make(Operator::Zero(2, 2), std::sqrt(kappa) * sigma_minus(),
              identity(2));
}

Operator sigma_minus() {
  Operator s = Operator::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

Operator sigma_plus() { return sigma_minus().adjoint(); }

Operator identity(int dim) { return Operator::Identity(dim, dim); }

Operator projector(int dim, int k) {
  Operator p = Operator::Zero(dim, dim);
  p(k, k) = 1.0;
  return p;
}

double max_abs(const Operator& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

bool is_finite(const Operator& A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (!std::isfinite(A(i, j).real()) || !std::isfinite(A(i, j).imag()))
        return false;
  return true;
}

bool is_hermitian(const Operator& A, double tol) {
  return A.rows() == A.cols() && max_abs(A - A.adjoint()) <= tol;
}

cplx trace(const Operator& A) { return A.trace(); }

Operator commutator(const Operator& A, const Operator& B) {
  require_same_dim(A, B, "commutator");
  return A * B - B * A;
}

Operator lindblad_apply(const SystemModel& model, const Operator& rho) {
  require_same_dim(model.H, rho, "lindblad_apply");
  const Operator LdL = model.L.adjoint() * model.L;
  return -kI * (model.H * rho - rho * model.H) +
         model.L * rho * model.L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

Operator adjoint_lindblad_apply(const SystemModel& model, const Operator& X) {
  require_same_dim(model.H, X, "adjoint_lindblad_apply");
  const Operator LdL = model.L.adjoint() * model.L;
  return kI * (model.H * X - X * model.H) + model.L.adjoint() * X * model.L -
         0.5 * (LdL * X + X * LdL);
}

Operator kron(const Operator& A, const Operator& B) {
  Operator out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

Operator partial_trace_ancilla(const Operator& rho_ext, int sys_dim) {
  require_square(rho_ext, "partial_trace_ancilla");
  if (sys_dim < 1 || rho_ext.rows() != 2 * sys_dim)
    fail(ErrorCode::invalid_argument,
         "partial_trace_ancilla: expected dimension 2 * " +
             std::to_string(sys_dim) + ", got " +
             std::to_string(rho_ext.rows()));
  Operator out(sys_dim, sys_dim);
  for (int i = 0; i < sys_dim; ++i)
    for (int j = 0; j < sys_dim; ++j)
      out(i, j) = rho_ext(2 * i, 2 * j) + rho_ext(2 * i + 1, 2 * j + 1);
  return out;
}

Operator ancilla_sandwich(const Operator& rho_ext, const Operator& left,
                          const Operator& right) {
  require_square(rho_ext, "ancilla_sandwich");
  if (rho_ext.rows() % 2 != 0)
    fail(ErrorCode::invalid_argument,
         "ancilla_sandwich: extended dimension must be even");
  if (left.rows() != 2 || left.cols() != 2 || right.rows() != 2 ||
      right.cols() != 2)
    fail(ErrorCode::invalid_argument,
         "ancilla_sandwich: ancilla operators must be 2x2");
  const int d = static_cast<int>(rho_ext.rows() / 2);
  Operator out = Operator::Zero(d, d);
  // sum_{a,b,c} left(a,b) * block(b,c) * right(c,a)
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      if (left(a, b) == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        const cplx w = left(a, b) * right(c, a);
        if (w == 0.0) continue;
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) out(i, j) += w * rho_ext(2 * i + b, 2 * j + c);
      }
    }
  return out;
}

}  // namespace ncfilter
