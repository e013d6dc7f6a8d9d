#pragma once

// Temporal profiles of the input field and the field states built on them.

#include <variant>
#include <vector>

#include "ncfilter/operator.hpp"

namespace ncfilter {

/// Below this tail weight the ancilla coupling is clamped to zero and the
/// auxiliary filter matrices are dropped.
inline constexpr double kTailEps = 1e-20;

class Envelope {
 public:
  enum class Kind { gaussian, tabulated };
  /// unit_norm: single-photon wavepacket xi(t), normalized on [0, inf).
  /// coherent: coherent amplitude alpha(t), no normalization.
  enum class Mode { unit_norm, coherent };

  /// Gaussian pulse of spectral width omega centred at t_c.
  ///   unit_norm: (1/N) (omega^2 / 2pi)^(1/4) exp(-omega^2 (t - t_c)^2 / 4)
  ///   coherent:  (2 omega^2 / pi)^(1/4)   exp(-omega^2 (t - t_c)^2 / 4)
  static Envelope gaussian(double omega, double t_c, Mode mode);

  /// Linear interpolation of (times, values); zero outside the table.
  static Envelope tabulated(std::vector<double> times, std::vector<cplx> values,
                            Mode mode);

  Kind kind() const { return kind_; }
  Mode mode() const { return mode_; }
  double omega() const { return omega_; }
  double t_c() const { return t_c_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<cplx>& values() const { return values_; }

  /// Envelope value at t >= 0.
  cplx eval(double t) const;
  cplx operator()(double t) const { return eval(t); }

  /// Integral of |env|^2 over [t, inf); equals norm() for t <= 0.
  double tail_integral(double t) const;

  /// Integral of |env|^2 over [0, inf).
  double norm() const { return norm_; }

  /// For N: the Gaussian normalization constant (1 for tabulated envelopes).
  double normalization() const { return normalization_; }

  /// xi(t) / sqrt(tail_integral(t)); zero where xi vanishes or the tail is
  /// below eps.
  cplx lambda(double t, double eps = kTailEps) const;

  bool operator==(const Envelope& o) const;

 private:
  Envelope() = default;

  Kind kind_ = Kind::gaussian;
  Mode mode_ = Mode::unit_norm;
  double omega_ = 0.0;
  double t_c_ = 0.0;
  double amplitude_ = 0.0;       // gaussian prefactor
  double tail_scale_ = 0.0;      // gaussian: integral over the whole line
  double normalization_ = 1.0;
  std::vector<double> times_;
  std::vector<cplx> values_;
  std::vector<double> suffix_;   // tabulated: integral from node k to the end
  double norm_ = 0.0;
};

/// tail_integral wrapper matching the operation name used in docs.
inline double tail_integral(const Envelope& env, double t) {
  return env.tail_integral(t);
}

inline cplx lambda_coupling(const Envelope& env, double t, double eps) {
  return env.lambda(t, eps);
}

/// 2x2 coefficient matrix of a vacuum / single-photon combination.
/// g10 is conj(g01) and is not stored.
struct GammaMatrix {
  double g00 = 1.0;
  double g11 = 0.0;
  cplx g01 = 0.0;

  cplx g10() const { return std::conj(g01); }
  void validate() const;
  bool operator==(const GammaMatrix&) const = default;
};

struct PhotonCombo {
  GammaMatrix gamma;
  Envelope xi;
};

struct CoherentMixture {
  std::vector<double> weights;
  std::vector<Envelope> alphas;
};

class FieldState {
 public:
  static FieldState photon_combo(GammaMatrix gamma, Envelope xi);
  static FieldState coherent_mixture(std::vector<double> weights,
                                     std::vector<Envelope> alphas);

  bool is_photon() const { return std::holds_alternative<PhotonCombo>(v_); }
  bool is_coherent() const {
    return std::holds_alternative<CoherentMixture>(v_);
  }
  const PhotonCombo& photon() const;
  const CoherentMixture& coherent() const;

 private:
  explicit FieldState(std::variant<PhotonCombo, CoherentMixture> v)
      : v_(std::move(v)) {}
  std::variant<PhotonCombo, CoherentMixture> v_;
};

/// Mean input photon flux: g11 |xi|^2 or sum_i w_i |alpha_i|^2.
double photon_flux(const FieldState& fs, double t);

/// Mean photon number of a pulse, integral of |env|^2 over [0, inf), by
/// adaptive quadrature of the profile (independent of the cached tail).
double pulse_energy(const Envelope& env);

}  // namespace ncfilter
