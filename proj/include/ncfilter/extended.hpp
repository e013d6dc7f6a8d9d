#pragma once

// Independent reference: the system together with a two-level ancilla whose
// decay into vacuum generates the input field. Everything here works on the
// full 2d x 2d density matrix (system (x) ancilla) and is reduced to the
// hierarchy matrices only for comparison.

#include <optional>
#include <vector>

#include "ncfilter/trajectory.hpp"

namespace ncfilter {

struct ExtendedState {
  Operator rho;

  int sys_dim() const { return static_cast<int>(rho.rows()) / 2; }
};

class AncillaGenerator {
 public:
  enum class Kind { off, photon, coherent };

  /// L_A(t) = lambda(t) sigma_minus.
  static AncillaGenerator photon(const Envelope& xi);
  /// L_A(t) = diag(alpha_0(t), alpha_1(t)); exactly two components.
  static AncillaGenerator coherent(const std::vector<Envelope>& alphas);
  static AncillaGenerator from_field(const FieldState& fs);
  /// L_A = 0.
  static AncillaGenerator off();

  Kind kind() const { return kind_; }
  /// 2x2 ancilla coupling at time t.
  Operator L_A(double t) const;
  /// Remaining single-photon weight: tail integral of xi (photon), else 0.
  double tail(double t) const;

 private:
  Kind kind_ = Kind::off;
  std::optional<Envelope> xi_;
  std::vector<Envelope> alphas_;
};

/// rho0 (x) rho_A with rho_A = [[g00, g10], [g01, g11]] for photon
/// combinations, or the pure state sqrt(w_0)|0> + sqrt(w_1)|1> for coherent
/// mixtures.
ExtendedState initial_extended_state(const Operator& rho0, const FieldState& fs);

Operator extended_master_rhs(const ExtendedState& st, double t,
                             const SystemModel& model,
                             const AncillaGenerator& gen);

/// RK4 solution of the extended master equation on every grid node.
std::vector<ExtendedState> integrate_extended(const ExtendedState& st0,
                                             const TimeGrid& grid,
                                             const SystemModel& model,
                                             const AncillaGenerator& gen);

/// Hierarchy matrices carried by the extended state at time t:
/// photon: rho_S = Tr_A, rho_minus = Tr_A[sigma_- .] / sqrt(T),
///         rho_plus = Tr_A[sigma_+ .] / sqrt(T), rho_mp = Tr_A[sigma_- . sigma_+] / T
///         (auxiliaries zero once T < kTailEps);
/// coherent: the diagonal ancilla blocks <i|rho|i>.
HierarchyState reduce_extended(const ExtendedState& st, double t,
                               const AncillaGenerator& gen);

/// Counting intensity Tr[(L + S L_A)^+ (L + S L_A) rho].
double extended_intensity(const ExtendedState& st, double t,
                          const SystemModel& model, const AncillaGenerator& gen);
/// Quadrature rate Tr[(L + L^+ + S L_A + L_A^+ S^+) rho].
double extended_vt(const ExtendedState& st, double t, const SystemModel& model,
                   const AncillaGenerator& gen);

/// One counting filter step; returns the k_t used. For the photon generator
/// the excited ancilla level is rescaled by the exact tail ratio instead of
/// the first-order loss term (see README).
double extended_counting_step(ExtendedState& st, double t, double dt, bool jump,
                              const SystemModel& model,
                              const AncillaGenerator& gen);
/// One homodyne filter step; returns the v_t used.
double extended_homodyne_step(ExtendedState& st, double t, double dt, double dW,
                              const SystemModel& model,
                              const AncillaGenerator& gen);

/// Reduced quantities along an extended trajectory driven by a given record.
struct ExtendedReplay {
  std::vector<HierarchyState> reduced;  // per node
  std::vector<double> rate;             // k_t or v_t per node
};
ExtendedReplay replay_extended(const SystemModel& model, const FieldState& fs,
                               const Operator& rho0,
                               const MeasurementRecord& record);

struct AncillaAmplitudes {
  cplx vacuum_ground;    // c0
  cplx excited;          // c1 sqrt(T(t))
  cplx emitted;          // c1 sqrt(1 - T(t)), norm of the emitted photon part
};

/// Amplitudes of the exact ancilla + field solution at time t.
AncillaAmplitudes ancilla_output_check(const Envelope& xi, cplx c0, cplx c1,
                                       double t);

/// H_S - (i/2)(L^+L + L_A^+ L_A + 2 L^+ S L_A) on the extended space.
Operator effective_hamiltonian(double t, const SystemModel& model,
                               const AncillaGenerator& gen);

/// Unnormalized no-jump propagation from t0 to t1 (RK4, step <= dt).
ExtendedState heff_propagate(const ExtendedState& st, double t0, double t1,
                             const SystemModel& model,
                             const AncillaGenerator& gen, double dt = 1e-3);

/// Density of counts at exactly the given times and none else in (0, T].
double multi_time_density(const std::vector<double>& jump_times, double T,
                          const SystemModel& model, const AncillaGenerator& gen,
                          const ExtendedState& initial, double dt = 1e-3);

}  // namespace ncfilter
