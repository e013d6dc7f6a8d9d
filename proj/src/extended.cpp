#include "ncfilter/extended.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncfilter {

namespace {

// System operators lifted to the extended space.
struct Lifted {
  Operator H, L, S, Ld, Sd;

  explicit Lifted(const SystemModel& m) {
    const Operator I2 = identity(2);
    H = kron(m.H, I2);
    L = kron(m.L, I2);
    S = kron(m.S, I2);
    Ld = L.adjoint();
    Sd = S.adjoint();
  }
};

Operator lift_ancilla(const Operator& a, int d) { return kron(identity(d), a); }

void check_dims(const ExtendedState& st, const SystemModel& model,
                const char* where) {
  if (st.rho.rows() != 2 * model.dim() || st.rho.cols() != 2 * model.dim())
    fail(ErrorCode::invalid_argument,
         std::string(where) + ": extended state must have dimension 2 d");
}

void renormalize(ExtendedState& st, double t, const char* where) {
  const double tr = st.rho.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    std::ostringstream msg;
    msg << where << ": state lost positivity or became non-finite at t = " << t;
    fail(ErrorCode::numeric, msg.str());
  }
  st.rho /= tr;
}

// I (x) diag(1, f) with f = sqrt(T(t + dt) / T(t)); f = 0 once either tail is
// below the clamp.
Operator tail_scaling(const AncillaGenerator& gen, double t, double dt, int d) {
  const double t0 = gen.tail(t);
  const double t1 = gen.tail(t + dt);
  const double f = (t0 < kTailEps || t1 < kTailEps) ? 0.0 : std::sqrt(t1 / t0);
  Operator k = Operator::Zero(2, 2);
  k(0, 0) = 1.0;
  k(1, 1) = f;
  return lift_ancilla(k, d);
}

}  // namespace

AncillaGenerator AncillaGenerator::photon(const Envelope& xi) {
  if (xi.mode() != Envelope::Mode::unit_norm)
    fail(ErrorCode::invalid_argument,
         "photon generator needs a unit-norm envelope");
  AncillaGenerator g;
  g.kind_ = Kind::photon;
  g.xi_ = xi;
  return g;
}

AncillaGenerator AncillaGenerator::coherent(const std::vector<Envelope>& alphas) {
  if (alphas.size() != 2)
    fail(ErrorCode::invalid_argument,
         "coherent generator needs exactly two components");
  AncillaGenerator g;
  g.kind_ = Kind::coherent;
  g.alphas_ = alphas;
  return g;
}

AncillaGenerator AncillaGenerator::from_field(const FieldState& fs) {
  if (fs.is_photon()) return photon(fs.photon().xi);
  return coherent(fs.coherent().alphas);
}

AncillaGenerator AncillaGenerator::off() { return AncillaGenerator(); }

Operator AncillaGenerator::L_A(double t) const {
  Operator a = Operator::Zero(2, 2);
  switch (kind_) {
    case Kind::off:
      break;
    case Kind::photon:
      a(0, 1) = xi_->lambda(t, kTailEps);
      break;
    case Kind::coherent:
      a(0, 0) = alphas_[0](t);
      a(1, 1) = alphas_[1](t);
      break;
  }
  return a;
}

double AncillaGenerator::tail(double t) const {
  return kind_ == Kind::photon ? xi_->tail_integral(t) : 0.0;
}

ExtendedState initial_extended_state(const Operator& rho0, const FieldState& fs) {
  require_square(rho0, "initial_extended_state");
  Operator ra(2, 2);
  if (fs.is_photon()) {
    const GammaMatrix& g = fs.photon().gamma;
    ra << g.g00, g.g10(), g.g01, g.g11;
  } else {
    const auto& w = fs.coherent().weights;
    if (w.size() != 2)
      fail(ErrorCode::invalid_argument,
           "extended oracle supports exactly two coherent components");
    const double c0 = std::sqrt(w[0]);
    const double c1 = std::sqrt(w[1]);
    ra << c0 * c0, c0 * c1, c1 * c0, c1 * c1;
  }
  return {kron(rho0, ra)};
}

Operator extended_master_rhs(const ExtendedState& st, double t,
                             const SystemModel& model,
                             const AncillaGenerator& gen) {
  check_dims(st, model, "extended_master_rhs");
  const int d = model.dim();
  const Lifted o(model);
  const Operator LA = lift_ancilla(gen.L_A(t), d);
  const Operator LAd = LA.adjoint();
  const Operator& r = st.rho;

  Operator out = -kI * (o.H * r - r * o.H) + o.L * r * o.Ld -
                 0.5 * (o.Ld * o.L * r + r * o.Ld * o.L);
  out += LA * r * LAd - 0.5 * (LAd * LA * r + r * LAd * LA);
  out += commutator(o.S * LA * r, o.Ld) + commutator(o.L, r * LAd * o.Sd);
  out += o.S * LA * r * LAd * o.Sd - LA * r * LAd;
  return out;
}

std::vector<ExtendedState> integrate_extended(const ExtendedState& st0,
                                             const TimeGrid& grid,
                                             const SystemModel& model,
                                             const AncillaGenerator& gen) {
  check_dims(st0, model, "integrate_extended");
  std::vector<ExtendedState> out;
  out.reserve(static_cast<std::size_t>(grid.steps) + 1);
  out.push_back(st0);
  const double h = grid.dt;
  for (int n = 0; n < grid.steps; ++n) {
    const double t = grid.t(n);
    const Operator& r = out.back().rho;
    const Operator k1 = extended_master_rhs({r}, t, model, gen);
    const Operator k2 = extended_master_rhs({r + 0.5 * h * k1}, t + 0.5 * h, model, gen);
    const Operator k3 = extended_master_rhs({r + 0.5 * h * k2}, t + 0.5 * h, model, gen);
    const Operator k4 = extended_master_rhs({r + h * k3}, t + h, model, gen);
    ExtendedState next{r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)};
    if (!is_finite(next.rho)) {
      std::ostringstream msg;
      msg << "integrate_extended: non-finite state at t = " << grid.t(n + 1);
      fail(ErrorCode::numeric, msg.str());
    }
    out.push_back(std::move(next));
  }
  return out;
}

HierarchyState reduce_extended(const ExtendedState& st, double t,
                               const AncillaGenerator& gen) {
  const int d = st.sys_dim();
  if (gen.kind() == AncillaGenerator::Kind::coherent) {
    return {Layout::coherent,
            {ancilla_sandwich(st.rho, projector(2, 0), projector(2, 0)),
             ancilla_sandwich(st.rho, projector(2, 1), projector(2, 1))}};
  }
  HierarchyState h{Layout::cascade, {}};
  h.mats.push_back(partial_trace_ancilla(st.rho, d));
  const double T = gen.tail(t);
  if (T < kTailEps) {
    const Operator z = Operator::Zero(d, d);
    h.mats.insert(h.mats.end(), {z, z, z});
    return h;
  }
  const Operator I2 = identity(2);
  h.mats.push_back(ancilla_sandwich(st.rho, sigma_minus(), I2) / std::sqrt(T));
  h.mats.push_back(ancilla_sandwich(st.rho, sigma_plus(), I2) / std::sqrt(T));
  h.mats.push_back(ancilla_sandwich(st.rho, sigma_minus(), sigma_plus()) / T);
  return h;
}

namespace {

Operator jump_operator(const Lifted& o, const Operator& LA) { return o.L + o.S * LA; }

}  // namespace

double extended_intensity(const ExtendedState& st, double t,
                          const SystemModel& model, const AncillaGenerator& gen) {
  check_dims(st, model, "extended_intensity");
  const Lifted o(model);
  const Operator C = jump_operator(o, lift_ancilla(gen.L_A(t), model.dim()));
  return std::max(0.0, (C.adjoint() * C * st.rho).trace().real());
}

double extended_vt(const ExtendedState& st, double t, const SystemModel& model,
                   const AncillaGenerator& gen) {
  check_dims(st, model, "extended_vt");
  const Lifted o(model);
  const Operator C = jump_operator(o, lift_ancilla(gen.L_A(t), model.dim()));
  return ((C + C.adjoint()) * st.rho).trace().real();
}

double extended_counting_step(ExtendedState& st, double t, double dt, bool jump,
                              const SystemModel& model,
                              const AncillaGenerator& gen) {
  check_dims(st, model, "extended_counting_step");
  const int d = model.dim();
  const Lifted o(model);
  const Operator LA = lift_ancilla(gen.L_A(t), d);
  const Operator C = jump_operator(o, LA);
  const Operator& r = st.rho;
  const double k = std::max(0.0, (C.adjoint() * C * r).trace().real());
  const bool photon = gen.kind() == AncillaGenerator::Kind::photon;

  Operator next;
  if (jump) {
    if (k < kJumpThreshold) {
      std::ostringstream msg;
      msg << "jump at vanishing intensity (k_t = " << k << ", t = " << t << ")";
      fail(ErrorCode::numeric, msg.str());
    }
    next = C * r * C.adjoint() / k;
  } else {
    Operator drift = extended_master_rhs(st, t, model, gen) - C * r * C.adjoint() + k * r;
    if (photon) {
      const Operator LAdLA = LA.adjoint() * LA;
      drift += 0.5 * (LAdLA * r + r * LAdLA);
    }
    next = r + dt * drift;
  }
  if (photon) {
    const Operator K = tail_scaling(gen, t, dt, d);
    next = K * next * K;
  }
  st.rho = std::move(next);
  renormalize(st, t, "extended_counting_step");
  return k;
}

double extended_homodyne_step(ExtendedState& st, double t, double dt, double dW,
                              const SystemModel& model,
                              const AncillaGenerator& gen) {
  check_dims(st, model, "extended_homodyne_step");
  if (!std::isfinite(dW))
    fail(ErrorCode::invalid_argument, "extended_homodyne_step: dW must be finite");
  const int d = model.dim();
  const Lifted o(model);
  const Operator LA = lift_ancilla(gen.L_A(t), d);
  const Operator C = jump_operator(o, LA);
  const Operator& r = st.rho;
  const double v = ((C + C.adjoint()) * r).trace().real();
  const bool photon = gen.kind() == AncillaGenerator::Kind::photon;

  Operator drift = extended_master_rhs(st, t, model, gen);
  if (photon) {
    const Operator LAdLA = LA.adjoint() * LA;
    drift += 0.5 * (LAdLA * r + r * LAdLA);
  }
  Operator next = r + dt * drift + dW * (C * r + r * C.adjoint() - v * r);
  if (photon) {
    const Operator K = tail_scaling(gen, t, dt, d);
    next = K * next * K;
  }
  st.rho = std::move(next);
  renormalize(st, t, "extended_homodyne_step");
  return v;
}

ExtendedReplay replay_extended(const SystemModel& model, const FieldState& fs,
                               const Operator& rho0,
                               const MeasurementRecord& record) {
  const AncillaGenerator gen = AncillaGenerator::from_field(fs);
  ExtendedState st = initial_extended_state(rho0, fs);
  const TimeGrid& grid = record.grid;
  ExtendedReplay out;
  out.reduced.reserve(static_cast<std::size_t>(grid.steps) + 1);
  out.rate.reserve(static_cast<std::size_t>(grid.steps) + 1);
  std::size_t next_jump = 0;
  for (int n = 0;; ++n) {
    const double t = grid.t(n);
    out.reduced.push_back(reduce_extended(st, t, gen));
    if (record.scheme == Scheme::counting) {
      out.rate.push_back(extended_intensity(st, t, model, gen));
      if (n == grid.steps) break;
      const bool jump = next_jump < record.jump_steps.size() &&
                        record.jump_steps[next_jump] == n;
      if (jump) ++next_jump;
      extended_counting_step(st, t, grid.dt, jump, model, gen);
    } else {
      const double v = extended_vt(st, t, model, gen);
      out.rate.push_back(v);
      if (n == grid.steps) break;
      const double dW = record.dY.at(static_cast<std::size_t>(n)) - v * grid.dt;
      extended_homodyne_step(st, t, grid.dt, dW, model, gen);
    }
  }
  return out;
}

AncillaAmplitudes ancilla_output_check(const Envelope& xi, cplx c0, cplx c1,
                                       double t) {
  if (std::abs(std::norm(c0) + std::norm(c1) - 1.0) > 1e-12)
    fail(ErrorCode::invalid_argument,
         "ancilla_output_check: |c0|^2 + |c1|^2 must equal 1");
  const double T = std::clamp(xi.tail_integral(t), 0.0, 1.0);
  return {c0, c1 * std::sqrt(T), c1 * std::sqrt(1.0 - T)};
}

namespace {

Operator heff_lifted(const Lifted& o, const Operator& LA) {
  return o.H - 0.5 * kI * (o.Ld * o.L + LA.adjoint() * LA + 2.0 * o.Ld * o.S * LA);
}

Operator heff_propagate_lifted(const Lifted& o, Operator r, double t0, double t1,
                               const AncillaGenerator& gen, double dt, int d) {
  if (t1 == t0) return r;
  const int steps = static_cast<int>(std::ceil((t1 - t0) / dt - 1e-9));
  const double h = (t1 - t0) / steps;
  auto gen_rhs = [&](const Operator& x, const Operator& He) -> Operator {
    Operator out = -kI * (He * x);
    out.noalias() += kI * (x * He.adjoint());
    return out;
  };
  for (int n = 0; n < steps; ++n) {
    const double t = t0 + n * h;
    const Operator H0 = heff_lifted(o, lift_ancilla(gen.L_A(t), d));
    const Operator Hm = heff_lifted(o, lift_ancilla(gen.L_A(t + 0.5 * h), d));
    const Operator H1 = heff_lifted(o, lift_ancilla(gen.L_A(t + h), d));
    const Operator k1 = gen_rhs(r, H0);
    const Operator k2 = gen_rhs(r + 0.5 * h * k1, Hm);
    const Operator k3 = gen_rhs(r + 0.5 * h * k2, Hm);
    const Operator k4 = gen_rhs(r + h * k3, H1);
    r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return r;
}

}  // namespace

Operator effective_hamiltonian(double t, const SystemModel& model,
                               const AncillaGenerator& gen) {
  return heff_lifted(Lifted(model), lift_ancilla(gen.L_A(t), model.dim()));
}

ExtendedState heff_propagate(const ExtendedState& st, double t0, double t1,
                             const SystemModel& model,
                             const AncillaGenerator& gen, double dt) {
  check_dims(st, model, "heff_propagate");
  if (!(t1 >= t0)) fail(ErrorCode::invalid_argument, "heff_propagate: t1 < t0");
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "heff_propagate: dt <= 0");
  return {heff_propagate_lifted(Lifted(model), st.rho, t0, t1, gen, dt, model.dim())};
}

double multi_time_density(const std::vector<double>& jump_times, double T,
                          const SystemModel& model, const AncillaGenerator& gen,
                          const ExtendedState& initial, double dt) {
  double prev = 0.0;
  for (double tj : jump_times) {
    if (!(tj > prev) || !(tj < T))
      fail(ErrorCode::invalid_argument,
           "multi_time_density: times must satisfy 0 < t1 < ... < tn < T");
    prev = tj;
  }
  check_dims(initial, model, "multi_time_density");
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "multi_time_density: dt <= 0");
  const Lifted o(model);
  const int d = model.dim();
  ExtendedState st = initial;
  double t = 0.0;
  for (double tj : jump_times) {
    st.rho = heff_propagate_lifted(o, std::move(st.rho), t, tj, gen, dt, d);
    const Operator C = jump_operator(o, lift_ancilla(gen.L_A(tj), d));
    st.rho = C * st.rho * C.adjoint();
    t = tj;
  }
  st.rho = heff_propagate_lifted(o, std::move(st.rho), t, T, gen, dt, d);
  return std::max(0.0, st.rho.trace().real());
}

}  // namespace ncfilter
