#pragma once

// Conditional (a posteriori) dynamics under photon counting and homodyne
// detection, plus the unnormalized no-count systems.
//
// Filter states use the cascade layout for photon combinations and the
// weighted-component layout for coherent mixtures (see hierarchy.hpp).

#include "ncfilter/hierarchy.hpp"

namespace ncfilter {

/// Below this intensity the jump map is undefined and never applied.
inline constexpr double kJumpThreshold = 1e-14;

struct FilterState : HierarchyState {
  bool normalized = true;

  FilterState() = default;
  explicit FilterState(HierarchyState st, bool norm = true)
      : HierarchyState(std::move(st)), normalized(norm) {}
};

/// Unnormalized matrices whose rho_S trace (sum of traces for mixtures) is
/// the probability of no count so far.
struct NoCountState : HierarchyState {
  NoCountState() = default;
  explicit NoCountState(HierarchyState st) : HierarchyState(std::move(st)) {}
};

FilterState initial_filter_state(const Operator& rho0, const FieldState& fs);
NoCountState initial_nocount_state(const Operator& rho0, const FieldState& fs);

/// Posterior counting intensity k_t. Negative values are clamped to 0; those
/// beyond plain roundoff (< -1e-12) increment *clamp_count when given.
double counting_intensity(const FilterState& st, double t,
                          const SystemModel& model, const FieldState& fs,
                          long* clamp_count = nullptr);

/// Between-jump derivative of the normalized counting filter.
HierarchyState counting_drift(const FilterState& st, double t,
                              const SystemModel& model, const FieldState& fs);

/// State right after a count at t. Throws numeric if k_t < kJumpThreshold.
FilterState counting_jump(const FilterState& st, double t,
                          const SystemModel& model, const FieldState& fs);

/// Posterior quadrature rate v_t.
double homodyne_vt(const FilterState& st, double t, const SystemModel& model,
                   const FieldState& fs);

/// Euler-Maruyama increment drift * dt + diffusion * dW (not renormalized).
HierarchyState homodyne_rhs(const FilterState& st, double t,
                            const SystemModel& model, const FieldState& fs,
                            double dt, double dW);

/// Diffusion coefficient alone (the increment per unit dW).
HierarchyState homodyne_diffusion(const FilterState& st, double t,
                                  const SystemModel& model,
                                  const FieldState& fs);

/// Full filter steps from t to t + dt as used by the trajectory engine:
/// left-point coefficients, exact tail bookkeeping for the photon branch and
/// trace renormalization. Return the k_t / v_t used for the step.
double counting_step(FilterState& st, double t, double dt, bool jump,
                     const SystemModel& model, const FieldState& fs);
double homodyne_step(FilterState& st, double t, double dt, double dW,
                     const SystemModel& model, const FieldState& fs);

HierarchyState nocount_rhs(const NoCountState& st, double t,
                           const SystemModel& model, const FieldState& fs);

/// No-count probability carried by the state.
double survival(const NoCountState& st);

/// P_0 on every node of the grid (RK4 of nocount_rhs).
std::vector<double> survival_curve(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid);

}  // namespace ncfilter
