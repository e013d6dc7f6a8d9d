#include "ncfilter/filters.hpp"

#include <cmath>
#include <sstream>

#include "ncfilter/detail/kernels.hpp"

namespace ncfilter {

using detail::ModelOps;
using detail::Quad;

namespace {

void check_state(const HierarchyState& st, const SystemModel& model,
                 const FieldState& fs, const char* where) {
  const bool ok = fs.is_photon()
                      ? (st.layout == Layout::cascade && st.size() == 4)
                      : (st.layout == Layout::coherent &&
                         st.size() == fs.coherent().weights.size());
  if (!ok)
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": state does not match the field variant");
  if (st.dim() != model.dim())
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": state and model dimensions differ");
}

Quad<Operator> to_quad(const HierarchyState& st) {
  return {st[0], st[1], st[2], st[3]};
}

HierarchyState from_quad(Quad<Operator>&& q) {
  return {Layout::cascade,
          {std::move(q.S), std::move(q.M), std::move(q.P), std::move(q.Q)}};
}

std::vector<cplx> alphas_at(const FieldState& fs, double t) {
  std::vector<cplx> a;
  for (const auto& e : fs.coherent().alphas) a.push_back(e(t));
  return a;
}

void check_trace(double tr, double t, const char* where) {
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    std::ostringstream msg;
    msg << where << ": state lost positivity or became non-finite at t = " << t;
    fail(ErrorCode::numeric, msg.str());
  }
}

}  // namespace

FilterState initial_filter_state(const Operator& rho0, const FieldState& fs) {
  return FilterState(initial_state(rho0, fs), true);
}

NoCountState initial_nocount_state(const Operator& rho0, const FieldState& fs) {
  return NoCountState(initial_state(rho0, fs));
}

double counting_intensity(const FilterState& st, double t,
                          const SystemModel& model, const FieldState& fs,
                          long* clamp_count) {
  check_state(st, model, fs, "counting_intensity");
  const ModelOps<Operator> ops(model);
  double k;
  if (fs.is_photon())
    k = detail::photon_intensity_raw(ops, to_quad(st), fs.photon().xi(t)).real();
  else
    k = detail::coherent_intensity_raw(ops, st.mats, alphas_at(fs, t)).real();
  if (k < 0.0) {
    if (clamp_count && k < -kExactTol) ++*clamp_count;
    k = 0.0;
  }
  return k;
}

HierarchyState counting_drift(const FilterState& st, double t,
                              const SystemModel& model, const FieldState& fs) {
  const double k = counting_intensity(st, t, model, fs);
  const ModelOps<Operator> ops(model);
  if (fs.is_photon())
    return from_quad(
        detail::photon_counting_drift(ops, to_quad(st), fs.photon().xi(t), k));
  const auto a = alphas_at(fs, t);
  HierarchyState d{Layout::coherent, {}};
  for (std::size_t i = 0; i < st.size(); ++i)
    d.mats.push_back(detail::coherent_nocount(ops, st[i], a[i]) + k * st[i]);
  return d;
}

FilterState counting_jump(const FilterState& st, double t,
                          const SystemModel& model, const FieldState& fs) {
  const double k = counting_intensity(st, t, model, fs);
  if (k < kJumpThreshold) {
    std::ostringstream msg;
    msg << "jump at vanishing intensity (k_t = " << k << ", t = " << t << ")";
    fail(ErrorCode::numeric, msg.str());
  }
  const ModelOps<Operator> ops(model);
  FilterState out;
  if (fs.is_photon()) {
    auto j = detail::photon_jump_numerators(ops, to_quad(st), fs.photon().xi(t));
    j *= 1.0 / k;
    out = FilterState(from_quad(std::move(j)));
  } else {
    const auto a = alphas_at(fs, t);
    HierarchyState h{Layout::coherent, {}};
    for (std::size_t i = 0; i < st.size(); ++i)
      h.mats.push_back(detail::coherent_jump_numerator(ops, st[i], a[i]) / k);
    out = FilterState(std::move(h));
  }
  return out;
}

double homodyne_vt(const FilterState& st, double t, const SystemModel& model,
                   const FieldState& fs) {
  check_state(st, model, fs, "homodyne_vt");
  const ModelOps<Operator> ops(model);
  if (fs.is_photon())
    return detail::photon_vt_raw(ops, to_quad(st), fs.photon().xi(t)).real();
  return detail::coherent_vt_raw(ops, st.mats, alphas_at(fs, t)).real();
}

HierarchyState homodyne_diffusion(const FilterState& st, double t,
                                  const SystemModel& model,
                                  const FieldState& fs) {
  const double v = homodyne_vt(st, t, model, fs);
  const ModelOps<Operator> ops(model);
  if (fs.is_photon())
    return from_quad(
        detail::photon_diffusion(ops, to_quad(st), fs.photon().xi(t), v));
  const auto a = alphas_at(fs, t);
  HierarchyState g{Layout::coherent, {}};
  for (std::size_t i = 0; i < st.size(); ++i)
    g.mats.push_back(detail::coherent_diffusion(ops, st[i], a[i], v));
  return g;
}

HierarchyState homodyne_rhs(const FilterState& st, double t,
                            const SystemModel& model, const FieldState& fs,
                            double dt, double dW) {
  if (!std::isfinite(dW))
    fail(ErrorCode::invalid_argument, "homodyne_rhs: dW must be finite");
  HierarchyState drift = rhs_field(st, t, model, fs);
  return dt * std::move(drift) + dW * homodyne_diffusion(st, t, model, fs);
}

double counting_step(FilterState& st, double t, double dt, bool jump,
                     const SystemModel& model, const FieldState& fs) {
  const double k = counting_intensity(st, t, model, fs);
  if (jump && k < kJumpThreshold) {
    std::ostringstream msg;
    msg << "jump at vanishing intensity (k_t = " << k << ", t = " << t << ")";
    fail(ErrorCode::numeric, msg.str());
  }
  const ModelOps<Operator> ops(model);
  double tr;
  if (fs.is_photon()) {
    const Envelope& xi = fs.photon().xi;
    const auto ts = detail::tail_step(xi.tail_integral(t),
                                      xi.tail_integral(t + dt), kTailEps);
    Quad<Operator> q = to_quad(st);
    tr = detail::photon_counting_step(ops, q, xi(t), ts, dt, jump, k);
    static_cast<HierarchyState&>(st) = from_quad(std::move(q));
  } else {
    tr = detail::coherent_counting_step(ops, st.mats, alphas_at(fs, t), dt,
                                        jump, k);
  }
  check_trace(tr, t, "counting_step");
  st.normalized = true;
  return k;
}

double homodyne_step(FilterState& st, double t, double dt, double dW,
                     const SystemModel& model, const FieldState& fs) {
  if (!std::isfinite(dW))
    fail(ErrorCode::invalid_argument, "homodyne_step: dW must be finite");
  const double v = homodyne_vt(st, t, model, fs);
  const ModelOps<Operator> ops(model);
  double tr;
  if (fs.is_photon()) {
    const Envelope& xi = fs.photon().xi;
    const auto ts = detail::tail_step(xi.tail_integral(t),
                                      xi.tail_integral(t + dt), kTailEps);
    Quad<Operator> q = to_quad(st);
    tr = detail::photon_homodyne_step(ops, q, xi(t), ts, dt, dW, v);
    static_cast<HierarchyState&>(st) = from_quad(std::move(q));
  } else {
    tr = detail::coherent_homodyne_step(ops, st.mats, alphas_at(fs, t), dt, dW,
                                        v);
  }
  check_trace(tr, t, "homodyne_step");
  st.normalized = true;
  return v;
}

HierarchyState nocount_rhs(const NoCountState& st, double t,
                           const SystemModel& model, const FieldState& fs) {
  check_state(st, model, fs, "nocount_rhs");
  const ModelOps<Operator> ops(model);
  if (fs.is_photon())
    return from_quad(
        detail::photon_nocount(ops, to_quad(st), fs.photon().xi(t)));
  const auto a = alphas_at(fs, t);
  HierarchyState d{Layout::coherent, {}};
  for (std::size_t i = 0; i < st.size(); ++i)
    d.mats.push_back(detail::coherent_nocount(ops, st[i], a[i]));
  return d;
}

double survival(const NoCountState& st) {
  if (st.layout == Layout::cascade) return st[0].trace().real();
  double p = 0.0;
  for (const auto& m : st.mats) p += m.trace().real();
  return p;
}

std::vector<double> survival_curve(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid) {
  const HierarchyRhs rhs = [&](const HierarchyState& s, double t) {
    return nocount_rhs(NoCountState(s), t, model, fs);
  };
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid.steps) + 1);
  HierarchyState st = initial_nocount_state(rho0, fs);
  out.push_back(survival(NoCountState(st)));
  for (int n = 0; n < grid.steps; ++n) {
    st = rk4_step(rhs, st, grid.t(n), grid.dt);
    const double p = survival(NoCountState(st));
    if (!std::isfinite(p)) {
      std::ostringstream msg;
      msg << "survival_curve: non-finite state at t = " << grid.t(n + 1);
      fail(ErrorCode::numeric, msg.str());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace ncfilter
