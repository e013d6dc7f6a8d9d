#pragma once

// Equation kernels shared by the public hierarchy / filter API (dynamic
// matrices) and the trajectory engine's fixed-size fast path. Everything here
// is templated on the Eigen matrix type.
//
// Photon-combination states are carried as four matrices
//   S = rho_S, M = rho^-, P = rho^+, Q = rho^-+ (the "cascade" layout),
// coherent mixtures as one matrix per component.

#include <cmath>
#include <complex>
#include <vector>

#include "ncfilter/operator.hpp"

namespace ncfilter::detail {

template <class Mat>
struct ModelOps {
  Mat H, L, S, Ld, Sd, LdL, LdS, SdL;
  Mat Heff, Heffd;  // H - (i/2) L^+ L and its adjoint

  explicit ModelOps(const SystemModel& m) : H(m.H), L(m.L), S(m.S) {
    Ld = L.adjoint();
    Sd = S.adjoint();
    LdL = Ld * L;
    LdS = Ld * S;
    SdL = Sd * L;
    Heff = H - (0.5 * kI) * LdL;
    Heffd = Heff.adjoint();
  }

  // -i[H, r] - 1/2 {L^+ L, r}
  Mat no_jump(const Mat& r) const {
    Mat out = -kI * (Heff * r);
    out.noalias() += kI * (r * Heffd);
    return out;
  }

  Mat lindblad(const Mat& r) const {
    Mat out = no_jump(r);
    out.noalias() += L * r * Ld;
    return out;
  }
};

template <class Mat>
inline Mat comm(const Mat& a, const Mat& b) {
  return a * b - b * a;
}

template <class Mat>
struct Quad {
  Mat S, M, P, Q;

  Quad& operator+=(const Quad& o) {
    S += o.S; M += o.M; P += o.P; Q += o.Q;
    return *this;
  }
  Quad& operator*=(double a) {
    S *= a; M *= a; P *= a; Q *= a;
    return *this;
  }
  void add_scaled(const Quad& o, cplx a) {
    S += a * o.S; M += a * o.M; P += a * o.P; Q += a * o.Q;
  }
  void zero_aux() {
    M.setZero(); P.setZero(); Q.setZero();
  }
};

// ---- photon combination -----------------------------------------------------

template <class Mat>
Quad<Mat> photon_hierarchy(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi) {
  const cplx xic = std::conj(xi);
  const double xi2 = std::norm(xi);
  Quad<Mat> d;
  d.S = o.lindblad(x.S) + xi * comm<Mat>(o.S * x.M, o.Ld) +
        xic * comm<Mat>(o.L, x.P * o.Sd) + xi2 * (o.S * x.Q * o.Sd - x.Q);
  d.M = o.lindblad(x.M) + xic * comm<Mat>(o.L, x.Q * o.Sd);
  d.P = o.lindblad(x.P) + xi * comm<Mat>(o.S * x.Q, o.Ld);
  d.Q = o.lindblad(x.Q);
  return d;
}

/// Numerators of the jump map (before division by k).
template <class Mat>
Quad<Mat> photon_jump_numerators(const ModelOps<Mat>& o, const Quad<Mat>& x,
                                 cplx xi) {
  const cplx xic = std::conj(xi);
  Quad<Mat> j;
  j.S = o.L * x.S * o.Ld + xi * (o.S * x.M * o.Ld) + xic * (o.L * x.P * o.Sd) +
        std::norm(xi) * (o.S * x.Q * o.Sd);
  j.M = o.L * x.M * o.Ld + xic * (o.L * x.Q * o.Sd);
  j.P = o.L * x.P * o.Ld + xi * (o.S * x.Q * o.Ld);
  j.Q = o.L * x.Q * o.Ld;
  return j;
}

template <class Mat>
cplx photon_intensity_raw(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi) {
  return (o.LdL * x.S).trace() + xi * (o.LdS * x.M).trace() +
         std::conj(xi) * (o.SdL * x.P).trace() + std::norm(xi) * x.Q.trace();
}

/// Between-jump drift. The L rho L^+ parts of the hierarchy cancel against
/// the jump numerators, leaving the no-count generator plus k X.
template <class Mat>
Quad<Mat> photon_nocount(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi);

template <class Mat>
Quad<Mat> photon_counting_drift(const ModelOps<Mat>& o, const Quad<Mat>& x,
                                cplx xi, double k) {
  Quad<Mat> d = photon_nocount(o, x, xi);
  d.add_scaled(x, k);
  return d;
}

template <class Mat>
cplx photon_vt_raw(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi) {
  return ((o.L + o.Ld) * x.S).trace() + xi * (o.S * x.M).trace() +
         std::conj(xi) * (x.P * o.Sd).trace();
}

template <class Mat>
Quad<Mat> photon_diffusion(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi,
                           double v) {
  const cplx xic = std::conj(xi);
  Quad<Mat> g;
  g.S = o.L * x.S + x.S * o.Ld + xi * (o.S * x.M) + xic * (x.P * o.Sd) - v * x.S;
  g.M = o.L * x.M + x.M * o.Ld + xic * (x.Q * o.Sd) - v * x.M;
  g.P = o.L * x.P + x.P * o.Ld + xi * (o.S * x.Q) - v * x.P;
  g.Q = o.L * x.Q + x.Q * o.Ld - v * x.Q;
  return g;
}

/// Unnormalized no-count generator for the photon combination.
template <class Mat>
Quad<Mat> photon_nocount(const ModelOps<Mat>& o, const Quad<Mat>& x, cplx xi) {
  const cplx xic = std::conj(xi);
  Quad<Mat> d;
  d.S = o.no_jump(x.S) - xi * (o.LdS * x.M) - xic * (x.P * o.SdL) -
        std::norm(xi) * x.Q;
  d.M = o.no_jump(x.M) - xic * (x.Q * o.SdL);
  d.P = o.no_jump(x.P) - xi * (o.LdS * x.Q);
  d.Q = o.no_jump(x.Q);
  return d;
}

/// Tail weights at the two ends of a filter step. Once the tail drops below
/// the clamp the photon has fully left the generator and the auxiliary
/// matrices carry no weight.
struct TailStep {
  double t0 = 0.0;  // tail at step start (0 if clamped)
  double t1 = 0.0;  // tail at step end (0 if clamped)
};

inline TailStep tail_step(double tail0, double tail1, double eps) {
  TailStep s;
  s.t0 = tail0 < eps ? 0.0 : tail0;
  s.t1 = (tail1 < eps || s.t0 == 0.0) ? 0.0 : tail1;
  return s;
}

template <class Mat>
double normalize(Quad<Mat>& y) {
  const double tr = y.S.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) return tr;
  y *= 1.0 / tr;
  return tr;
}

/// Applies the photon-loss bookkeeping shared by all photon filter steps.
///
/// The left-point loss term -|xi|^2 Q dt in the rho_S update is replaced by
/// the exact tail decrement (T1 - T0) applied to the end-of-step Q, so the
/// weight removed from the not-yet-arrived branch matches the pulse energy
/// that actually passed during the step.
template <class Mat>
void apply_tail_update(Quad<Mat>& y, const Quad<Mat>& x, cplx xi, double dt,
                       const TailStep& ts, bool drift_step) {
  if (ts.t0 == 0.0) {
    y.zero_aux();
    return;
  }
  if (drift_step) y.S += (dt * std::norm(xi)) * x.Q;
  y.S += (ts.t1 - ts.t0) * y.Q;
  if (ts.t1 == 0.0) y.zero_aux();
}

// ---- coherent mixture -------------------------------------------------------

template <class Mat>
using Comps = std::vector<Mat>;

template <class Mat>
Mat coherent_hierarchy(const ModelOps<Mat>& o, const Mat& r, cplx a) {
  return o.lindblad(r) + a * comm<Mat>(o.S * r, o.Ld) +
         std::conj(a) * comm<Mat>(o.L, r * o.Sd) +
         std::norm(a) * (o.S * r * o.Sd - r);
}

template <class Mat>
Mat coherent_jump_numerator(const ModelOps<Mat>& o, const Mat& r, cplx a) {
  const Mat c = o.L + a * o.S;
  return c * r * c.adjoint();
}

template <class Mat>
cplx coherent_intensity_raw(const ModelOps<Mat>& o, const Comps<Mat>& x,
                            const std::vector<cplx>& a) {
  cplx k = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Mat c = o.L + a[i] * o.S;
    k += (c.adjoint() * c * x[i]).trace();
  }
  return k;
}

template <class Mat>
cplx coherent_vt_raw(const ModelOps<Mat>& o, const Comps<Mat>& x,
                     const std::vector<cplx>& a) {
  cplx v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Mat c = o.L + a[i] * o.S;
    v += ((c + c.adjoint()) * x[i]).trace();
  }
  return v;
}

template <class Mat>
Mat coherent_diffusion(const ModelOps<Mat>& o, const Mat& r, cplx a, double v) {
  const Mat c = o.L + a * o.S;
  return c * r + r * c.adjoint() - v * r;
}

template <class Mat>
Mat coherent_nocount(const ModelOps<Mat>& o, const Mat& r, cplx a) {
  return o.no_jump(r) - a * (o.LdS * r) - std::conj(a) * (r * o.SdL) -
         std::norm(a) * r;
}

template <class Mat>
double normalize(Comps<Mat>& y) {
  double tr = 0.0;
  for (const auto& m : y) tr += m.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) return tr;
  for (auto& m : y) m *= 1.0 / tr;
  return tr;
}

// ---- single filter steps ----------------------------------------------------
//
// Each step returns the trace before renormalization; a non-positive or
// non-finite value means the step failed and the caller reports it.

template <class Mat>
double photon_counting_step(const ModelOps<Mat>& o, Quad<Mat>& x, cplx xi,
                            const TailStep& ts, double dt, bool jump,
                            double k) {
  Quad<Mat> y;
  if (jump) {
    y = photon_jump_numerators(o, x, xi);
    y *= 1.0 / k;
  } else {
    y = photon_counting_drift(o, x, xi, k);
    y *= dt;
    y += x;
  }
  apply_tail_update(y, x, xi, dt, ts, !jump);
  const double tr = normalize(y);
  x = std::move(y);
  return tr;
}

template <class Mat>
double photon_homodyne_step(const ModelOps<Mat>& o, Quad<Mat>& x, cplx xi,
                            const TailStep& ts, double dt, double dW,
                            double v) {
  Quad<Mat> y = photon_hierarchy(o, x, xi);
  y *= dt;
  y.add_scaled(photon_diffusion(o, x, xi, v), dW);
  y += x;
  apply_tail_update(y, x, xi, dt, ts, true);
  const double tr = normalize(y);
  x = std::move(y);
  return tr;
}

template <class Mat>
double coherent_counting_step(const ModelOps<Mat>& o, Comps<Mat>& x,
                              const std::vector<cplx>& a, double dt, bool jump,
                              double k) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (jump) {
      x[i] = coherent_jump_numerator(o, x[i], a[i]) * (1.0 / k);
    } else {
      Mat d = coherent_nocount(o, x[i], a[i]);
      d += k * x[i];
      x[i] += dt * d;
    }
  }
  return normalize(x);
}

template <class Mat>
double coherent_homodyne_step(const ModelOps<Mat>& o, Comps<Mat>& x,
                              const std::vector<cplx>& a, double dt, double dW,
                              double v) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    Mat d = dt * coherent_hierarchy(o, x[i], a[i]) +
            dW * coherent_diffusion(o, x[i], a[i], v);
    x[i] += d;
  }
  return normalize(x);
}

}  // namespace ncfilter::detail
