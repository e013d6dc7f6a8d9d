#pragma once

// Deterministic reduced dynamics for both field-state variants.

#include <functional>
#include <string>
#include <vector>

#include "ncfilter/envelope.hpp"
#include "ncfilter/operator.hpp"

namespace ncfilter {

/// fock:     {rho00, rho01, rho10, rho11}, unconditional state
///           g00 rho00 + g01 rho10 + g10 rho01 + g11 rho11
/// cascade:  {rho_S, rho_minus, rho_plus, rho_mp}
/// coherent: one matrix per mixture component, each carrying its weight as
///           trace; the unconditional state is their plain sum.
enum class Layout { fock, cascade, coherent };

struct HierarchyState {
  Layout layout = Layout::cascade;
  std::vector<Operator> mats;

  int dim() const { return mats.empty() ? 0 : static_cast<int>(mats[0].rows()); }
  std::size_t size() const { return mats.size(); }
  Operator& operator[](std::size_t i) { return mats[i]; }
  const Operator& operator[](std::size_t i) const { return mats[i]; }

  std::vector<std::string> labels() const;
  const Operator& at(const std::string& label) const;
};

HierarchyState& operator+=(HierarchyState& a, const HierarchyState& b);
HierarchyState operator+(HierarchyState a, const HierarchyState& b);
HierarchyState operator*(double s, HierarchyState a);
double max_abs_diff(const HierarchyState& a, const HierarchyState& b);

HierarchyState initial_fock(const Operator& rho0);
HierarchyState initial_cascade(const Operator& rho0, const GammaMatrix& gamma);
HierarchyState initial_coherent(const Operator& rho0,
                                const std::vector<double>& weights);
/// cascade or coherent layout, whichever fits the field.
HierarchyState initial_state(const Operator& rho0, const FieldState& fs);

HierarchyState rhs_fock_hierarchy(const HierarchyState& st, double t,
                                  const SystemModel& model, const Envelope& xi);
HierarchyState rhs_cascade_hierarchy(const HierarchyState& st, double t,
                                     const SystemModel& model,
                                     const Envelope& xi);
HierarchyState rhs_coherent_mixture(const HierarchyState& st, double t,
                                    const SystemModel& model,
                                    const std::vector<Envelope>& alphas,
                                    const std::vector<double>& weights);
/// Dispatches on the field variant (cascade / coherent layout).
HierarchyState rhs_field(const HierarchyState& st, double t,
                         const SystemModel& model, const FieldState& fs);

/// Uniform grid t_n = n dt, n = 0..steps.
struct TimeGrid {
  double dt = 1e-3;
  int steps = 0;

  double t(int n) const { return n * dt; }
  double T() const { return steps * dt; }
  /// Rounds T / dt to the nearest integer number of steps.
  static TimeGrid make(double dt, double T);
};

/// Default horizon t_c + 9 / omega rounded up to an integer.
double default_horizon(const FieldState& fs);

using HierarchyRhs = std::function<HierarchyState(const HierarchyState&, double)>;

/// Classic RK4; returns the state at every grid node. Throws numeric errors
/// naming the time if a NaN appears.
std::vector<HierarchyState> integrate_deterministic(const HierarchyRhs& rhs,
                                                    const HierarchyState& st0,
                                                    const TimeGrid& grid);

/// One RK4 step from t to t + dt.
HierarchyState rk4_step(const HierarchyRhs& rhs, const HierarchyState& st,
                        double t, double dt);

/// Physical system state for any layout.
Operator unconditional_state(const HierarchyState& st, const FieldState& fs);

/// Maps a Fock-layout solution onto the cascade matrices:
/// rho_S from the gamma combination, rho_minus = g11 rho01 + g01 rho00,
/// rho_plus = g11 rho10 + g10 rho00, rho_mp = g11 rho00.
HierarchyState fock_to_cascade(const HierarchyState& st,
                               const GammaMatrix& gamma);

/// Converts weighted coherent components to unit-trace ones (and back).
std::vector<Operator> coherent_unit_trace(const HierarchyState& st,
                                          const std::vector<double>& weights);
HierarchyState coherent_from_unit_trace(const std::vector<Operator>& comps,
                                        const std::vector<double>& weights);

/// Mean output photon flux <dLambda_out>/dt.
double expected_count_rate(const HierarchyState& st, double t,
                           const SystemModel& model, const FieldState& fs);
/// Mean output quadrature rate <dY>/dt.
double expected_quadrature_rate(const HierarchyState& st, double t,
                                const SystemModel& model, const FieldState& fs);

}  // namespace ncfilter
