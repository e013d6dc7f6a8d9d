#include "ncfilter/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncfilter/detail/kernels.hpp"

namespace ncfilter {

using detail::ModelOps;
using detail::Quad;

namespace {

void require_layout(const HierarchyState& st, Layout layout, std::size_t n,
                    const char* where) {
  if (st.layout != layout || (n && st.size() != n))
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": unexpected hierarchy layout");
  for (const auto& m : st.mats) require_same_dim(m, st.mats[0], where);
}

Quad<Operator> to_quad(const HierarchyState& st) {
  return {st[0], st[1], st[2], st[3]};
}

HierarchyState from_quad(Quad<Operator>&& q, Layout layout) {
  HierarchyState out;
  out.layout = layout;
  out.mats = {std::move(q.S), std::move(q.M), std::move(q.P), std::move(q.Q)};
  return out;
}

void require_model(const HierarchyState& st, const SystemModel& model,
                   const char* where) {
  if (st.dim() != model.dim())
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": state and model dimensions differ");
}

}  // namespace

std::vector<std::string> HierarchyState::labels() const {
  switch (layout) {
    case Layout::fock:
      return {"rho00", "rho01", "rho10", "rho11"};
    case Layout::cascade:
      return {"rho_S", "rho_minus", "rho_plus", "rho_mp"};
    case Layout::coherent: {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < mats.size(); ++i)
        out.push_back("rho_" + std::to_string(i) + std::to_string(i));
      return out;
    }
  }
  return {};
}

const Operator& HierarchyState::at(const std::string& label) const {
  const auto names = labels();
  const auto it = std::find(names.begin(), names.end(), label);
  if (it == names.end())
    fail(ErrorCode::invalid_argument, "hierarchy state has no matrix '" + label + "'");
  return mats[static_cast<std::size_t>(it - names.begin())];
}

HierarchyState& operator+=(HierarchyState& a, const HierarchyState& b) {
  if (a.size() != b.size())
    fail(ErrorCode::invalid_argument, "hierarchy sum: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.mats[i] += b.mats[i];
  return a;
}

HierarchyState operator+(HierarchyState a, const HierarchyState& b) {
  a += b;
  return a;
}

HierarchyState operator*(double s, HierarchyState a) {
  for (auto& m : a.mats) m *= s;
  return a;
}

double max_abs_diff(const HierarchyState& a, const HierarchyState& b) {
  if (a.size() != b.size())
    fail(ErrorCode::invalid_argument, "hierarchy diff: size mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    out = std::max(out, max_abs(a.mats[i] - b.mats[i]));
  return out;
}

HierarchyState initial_fock(const Operator& rho0) {
  require_square(rho0, "initial_fock");
  const Operator z = Operator::Zero(rho0.rows(), rho0.cols());
  return {Layout::fock, {rho0, z, z, rho0}};
}

HierarchyState initial_cascade(const Operator& rho0, const GammaMatrix& gamma) {
  require_square(rho0, "initial_cascade");
  gamma.validate();
  return {Layout::cascade,
          {rho0, gamma.g01 * rho0, gamma.g10() * rho0, gamma.g11 * rho0}};
}

HierarchyState initial_coherent(const Operator& rho0,
                                const std::vector<double>& weights) {
  require_square(rho0, "initial_coherent");
  HierarchyState st{Layout::coherent, {}};
  for (double w : weights) st.mats.push_back(w * rho0);
  return st;
}

HierarchyState initial_state(const Operator& rho0, const FieldState& fs) {
  if (fs.is_photon()) return initial_cascade(rho0, fs.photon().gamma);
  return initial_coherent(rho0, fs.coherent().weights);
}

HierarchyState rhs_fock_hierarchy(const HierarchyState& st, double t,
                                  const SystemModel& model, const Envelope& xi_env) {
  require_layout(st, Layout::fock, 4, "rhs_fock_hierarchy");
  require_model(st, model, "rhs_fock_hierarchy");
  const cplx xi = xi_env(t);
  const cplx xic = std::conj(xi);
  const Operator& r00 = st[0];
  const Operator& r01 = st[1];
  const Operator& r10 = st[2];
  const Operator& r11 = st[3];
  const Operator& L = model.L;
  const Operator& S = model.S;
  const Operator Ld = L.adjoint();
  const Operator Sd = S.adjoint();

  HierarchyState d{Layout::fock, {}};
  d.mats.resize(4);
  d[0] = lindblad_apply(model, r00);
  d[1] = lindblad_apply(model, r01) + xic * commutator(L, r00 * Sd);
  d[2] = lindblad_apply(model, r10) + xi * commutator(S * r00, Ld);
  d[3] = lindblad_apply(model, r11) + xi * commutator(S * r01, Ld) +
         xic * commutator(L, r10 * Sd) + std::norm(xi) * (S * r00 * Sd - r00);
  return d;
}

HierarchyState rhs_cascade_hierarchy(const HierarchyState& st, double t,
                                     const SystemModel& model,
                                     const Envelope& xi) {
  require_layout(st, Layout::cascade, 4, "rhs_cascade_hierarchy");
  require_model(st, model, "rhs_cascade_hierarchy");
  const ModelOps<Operator> ops(model);
  return from_quad(detail::photon_hierarchy(ops, to_quad(st), xi(t)),
                   Layout::cascade);
}

HierarchyState rhs_coherent_mixture(const HierarchyState& st, double t,
                                    const SystemModel& model,
                                    const std::vector<Envelope>& alphas,
                                    const std::vector<double>& weights) {
  require_layout(st, Layout::coherent, 0, "rhs_coherent_mixture");
  if (st.size() != alphas.size() || st.size() != weights.size())
    fail(ErrorCode::invalid_argument,
         "rhs_coherent_mixture: component count mismatch");
  require_model(st, model, "rhs_coherent_mixture");
  const ModelOps<Operator> ops(model);
  HierarchyState d{Layout::coherent, {}};
  d.mats.reserve(st.size());
  for (std::size_t i = 0; i < st.size(); ++i)
    d.mats.push_back(detail::coherent_hierarchy(ops, st[i], alphas[i](t)));
  return d;
}

HierarchyState rhs_field(const HierarchyState& st, double t,
                         const SystemModel& model, const FieldState& fs) {
  if (fs.is_photon()) {
    if (st.layout == Layout::fock)
      return rhs_fock_hierarchy(st, t, model, fs.photon().xi);
    return rhs_cascade_hierarchy(st, t, model, fs.photon().xi);
  }
  return rhs_coherent_mixture(st, t, model, fs.coherent().alphas,
                              fs.coherent().weights);
}

TimeGrid TimeGrid::make(double dt, double T) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    fail(ErrorCode::invalid_argument, "time grid: dt must be > 0");
  if (!(T > 0.0) || !std::isfinite(T))
    fail(ErrorCode::invalid_argument, "time grid: T must be > 0");
  const double n = std::round(T / dt);
  if (n < 1.0 || n > 2e9)
    fail(ErrorCode::invalid_argument, "time grid: T / dt out of range");
  return {dt, static_cast<int>(n)};
}

double default_horizon(const FieldState& fs) {
  auto horizon = [](const Envelope& e) {
    if (e.kind() == Envelope::Kind::gaussian)
      return e.t_c() + 9.0 / e.omega();
    return e.times().back();
  };
  double T = 0.0;
  if (fs.is_photon()) {
    T = horizon(fs.photon().xi);
  } else {
    for (const auto& a : fs.coherent().alphas) T = std::max(T, horizon(a));
  }
  return std::max(1.0, std::ceil(T));
}

HierarchyState rk4_step(const HierarchyRhs& rhs, const HierarchyState& st,
                        double t, double dt) {
  const HierarchyState k1 = rhs(st, t);
  const HierarchyState k2 = rhs(st + (0.5 * dt) * k1, t + 0.5 * dt);
  const HierarchyState k3 = rhs(st + (0.5 * dt) * k2, t + 0.5 * dt);
  const HierarchyState k4 = rhs(st + dt * k3, t + dt);
  HierarchyState out = st;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mats[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

std::vector<HierarchyState> integrate_deterministic(const HierarchyRhs& rhs,
                                                    const HierarchyState& st0,
                                                    const TimeGrid& grid) {
  if (!(grid.dt > 0.0))
    fail(ErrorCode::invalid_argument, "integrate_deterministic: dt must be > 0");
  std::vector<HierarchyState> out;
  out.reserve(static_cast<std::size_t>(grid.steps) + 1);
  out.push_back(st0);
  for (int n = 0; n < grid.steps; ++n) {
    HierarchyState next = rk4_step(rhs, out.back(), grid.t(n), grid.dt);
    for (const auto& m : next.mats) {
      if (!is_finite(m)) {
        std::ostringstream msg;
        msg << "integrate_deterministic: non-finite state at t = "
            << grid.t(n + 1);
        fail(ErrorCode::numeric, msg.str());
      }
    }
    out.push_back(std::move(next));
  }
  return out;
}

Operator unconditional_state(const HierarchyState& st, const FieldState& fs) {
  switch (st.layout) {
    case Layout::fock: {
      const GammaMatrix& g = fs.photon().gamma;
      return g.g00 * st[0] + g.g01 * st[2] + g.g10() * st[1] + g.g11 * st[3];
    }
    case Layout::cascade:
      return st[0];
    case Layout::coherent: {
      Operator out = Operator::Zero(st.dim(), st.dim());
      for (const auto& m : st.mats) out += m;
      return out;
    }
  }
  fail(ErrorCode::internal, "unconditional_state: bad layout");
}

HierarchyState fock_to_cascade(const HierarchyState& st,
                               const GammaMatrix& g) {
  require_layout(st, Layout::fock, 4, "fock_to_cascade");
  return {Layout::cascade,
          {g.g00 * st[0] + g.g01 * st[2] + g.g10() * st[1] + g.g11 * st[3],
           g.g11 * st[1] + g.g01 * st[0], g.g11 * st[2] + g.g10() * st[0],
           g.g11 * st[0]}};
}

std::vector<Operator> coherent_unit_trace(const HierarchyState& st,
                                          const std::vector<double>& weights) {
  require_layout(st, Layout::coherent, weights.size(), "coherent_unit_trace");
  std::vector<Operator> out;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (weights[i] <= 0.0)
      out.push_back(Operator::Zero(st.dim(), st.dim()));
    else
      out.push_back(st[i] / weights[i]);
  }
  return out;
}

HierarchyState coherent_from_unit_trace(const std::vector<Operator>& comps,
                                        const std::vector<double>& weights) {
  if (comps.size() != weights.size())
    fail(ErrorCode::invalid_argument,
         "coherent_from_unit_trace: component count mismatch");
  HierarchyState st{Layout::coherent, {}};
  for (std::size_t i = 0; i < comps.size(); ++i)
    st.mats.push_back(weights[i] * comps[i]);
  return st;
}

namespace {

HierarchyState as_field_layout(const HierarchyState& st, const FieldState& fs,
                               const char* where) {
  if (fs.is_photon()) {
    if (st.layout == Layout::fock) return fock_to_cascade(st, fs.photon().gamma);
    require_layout(st, Layout::cascade, 4, where);
    return st;
  }
  require_layout(st, Layout::coherent, fs.coherent().weights.size(), where);
  return st;
}

std::vector<cplx> alphas_at(const FieldState& fs, double t) {
  std::vector<cplx> a;
  for (const auto& e : fs.coherent().alphas) a.push_back(e(t));
  return a;
}

}  // namespace

double expected_count_rate(const HierarchyState& st_in, double t,
                           const SystemModel& model, const FieldState& fs) {
  const HierarchyState st = as_field_layout(st_in, fs, "expected_count_rate");
  require_model(st, model, "expected_count_rate");
  const ModelOps<Operator> ops(model);
  double k;
  if (fs.is_photon())
    k = detail::photon_intensity_raw(ops, to_quad(st), fs.photon().xi(t)).real();
  else
    k = detail::coherent_intensity_raw(ops, st.mats, alphas_at(fs, t)).real();
  return std::max(k, 0.0);
}

double expected_quadrature_rate(const HierarchyState& st_in, double t,
                                const SystemModel& model, const FieldState& fs) {
  const HierarchyState st =
      as_field_layout(st_in, fs, "expected_quadrature_rate");
  require_model(st, model, "expected_quadrature_rate");
  const ModelOps<Operator> ops(model);
  if (fs.is_photon())
    return detail::photon_vt_raw(ops, to_quad(st), fs.photon().xi(t)).real();
  return detail::coherent_vt_raw(ops, st.mats, alphas_at(fs, t)).real();
}

}  // namespace ncfilter
