#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ncfilter/error.hpp"
#include "ncfilter/extended.hpp"
#include "ncfilter/hierarchy.hpp"
#include "test_util.hpp"

using namespace ncfilter;

namespace {

Envelope fig1_pulse() { return Envelope::gaussian(1.46, 3.0, Envelope::Mode::unit_norm); }

GammaMatrix fig1_gamma() {
  GammaMatrix g;
  g.g00 = 0.2;
  g.g11 = 0.8;
  return g;
}

FieldState fig2_field() {
  return FieldState::coherent_mixture(
      {0.5, 0.5}, {Envelope::gaussian(2.4, 3.0, Envelope::Mode::coherent),
                   Envelope::gaussian(2.4, 5.0, Envelope::Mode::coherent)});
}

std::vector<HierarchyState> solve(const SystemModel& m, const FieldState& fs,
                                  const Operator& rho0, const TimeGrid& grid) {
  const HierarchyRhs rhs = [&](const HierarchyState& s, double t) {
    return rhs_field(s, t, m, fs);
  };
  return integrate_deterministic(rhs, initial_state(rho0, fs), grid);
}

HierarchyState cascade_from(const std::vector<Operator>& mats) {
  return HierarchyState{Layout::cascade, mats};
}

}  // namespace

TEST_CASE("vacuum envelope reduces every equation to the Lindblad generator") {
  // a pulse centred far away has xi(0) == 0 in double precision
  const Envelope far = Envelope::gaussian(1.0, 100.0, Envelope::Mode::unit_norm);
  REQUIRE(far.eval(0.0) == cplx(0.0));
  std::mt19937_64 rng(31);
  const SystemModel m = testutil::random_model(rng, 2);
  const auto mats = testutil::random_cascade(rng, 2);
  const HierarchyState fock{Layout::fock, mats};
  const HierarchyState d1 = rhs_fock_hierarchy(fock, 0.0, m, far);
  const HierarchyState d2 = rhs_cascade_hierarchy(cascade_from(mats), 0.0, m, far);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(max_abs(d1[k] - lindblad_apply(m, mats[k])) < kExactTol);
    CHECK(max_abs(d2[k] - lindblad_apply(m, mats[k])) < kExactTol);
  }
  const Envelope zero = Envelope::tabulated({0.0, 10.0}, {0.0, 0.0}, Envelope::Mode::coherent);
  const HierarchyState coh{Layout::coherent, {mats[0], mats[3]}};
  const HierarchyState d3 = rhs_coherent_mixture(coh, 1.0, m, {zero, zero}, {0.5, 0.5});
  CHECK(max_abs(d3[0] - lindblad_apply(m, mats[0])) < kExactTol);
  CHECK(max_abs(d3[1] - lindblad_apply(m, mats[3])) < kExactTol);
}

TEST_CASE("fock hierarchy structure") {
  std::mt19937_64 rng(32);
  const SystemModel m = testutil::random_model(rng, 2);
  const Operator r00 = testutil::random_density(rng, 2);
  const Operator r01 = testutil::random_matrix(rng, 2);
  const HierarchyState st{Layout::fock, {r00, r01, r01.adjoint(), testutil::random_density(rng, 2)}};
  const HierarchyState d = rhs_fock_hierarchy(st, 2.7, m, fig1_pulse());
  CHECK(is_hermitian(d[0], kExactTol));
  CHECK(is_hermitian(d[3], kExactTol));
  CHECK(max_abs(d[1] - d[2].adjoint()) < kExactTol);
  HierarchyState bad = st;
  bad.mats.pop_back();
  CHECK_THROWS_AS(rhs_fock_hierarchy(bad, 0.0, m, fig1_pulse()), Error);
  bad = st;
  bad[1] = identity(3);
  CHECK_THROWS_AS(rhs_fock_hierarchy(bad, 0.0, m, fig1_pulse()), Error);
}

TEST_CASE("cascade initial conditions") {
  std::mt19937_64 rng(33);
  const Operator rho = testutil::random_density(rng, 2);
  const GammaMatrix g = testutil::random_gamma(rng);
  const HierarchyState st = initial_cascade(rho, g);
  CHECK(max_abs(st[0] - rho) == 0.0);
  CHECK(max_abs(st[1] - g.g01 * rho) < kExactTol);
  CHECK(max_abs(st[2] - g.g10() * rho) < kExactTol);
  CHECK(max_abs(st[3] - g.g11 * rho) < kExactTol);
  CHECK(st.labels() == std::vector<std::string>{"rho_S", "rho_minus", "rho_plus", "rho_mp"});
  CHECK(max_abs(st.at("rho_mp") - st[3]) == 0.0);
}

TEST_CASE("vacuum input keeps the auxiliary matrices at zero") {
  const SystemModel m = SystemModel::two_level_decay(1.0);
  const FieldState vac = FieldState::photon_combo(GammaMatrix{}, fig1_pulse());
  const auto sol = solve(m, vac, projector(2, 1), TimeGrid::make(1e-3, 2.0));
  for (const auto& s : sol)
    for (int k = 1; k < 4; ++k) CHECK(max_abs(s[k]) == 0.0);
  CHECK(std::abs(sol.back()[0](1, 1).real() - std::exp(-2.0)) < 1e-10);
}

TEST_CASE("fock and cascade forms agree on random configurations") {
  std::mt19937_64 rng(34);
  const TimeGrid grid = TimeGrid::make(1e-3, 8.0);
  for (int rep = 0; rep < 5; ++rep) {
    const int d = rep < 3 ? 2 : 3;
    const SystemModel m = testutil::random_model(rng, d);
    const GammaMatrix g = testutil::random_gamma(rng);
    const Envelope xi = Envelope::gaussian(1.0 + rep * 0.3, 2.5, Envelope::Mode::unit_norm);
    const FieldState fs = FieldState::photon_combo(g, xi);
    const Operator rho0 = testutil::random_density(rng, d);
    const HierarchyRhs fock_rhs = [&](const HierarchyState& s, double t) {
      return rhs_fock_hierarchy(s, t, m, xi);
    };
    const auto a = integrate_deterministic(fock_rhs, initial_fock(rho0), grid);
    const auto b = solve(m, fs, rho0, grid);
    double dev = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n)
      dev = std::max(dev, max_abs_diff(fock_to_cascade(a[n], g), b[n]));
    CHECK(dev < 1e-8);
    CHECK(max_abs(unconditional_state(a.back(), fs) - b.back()[0]) < 1e-8);
  }
}

TEST_CASE("conserved traces and Hermiticity") {
  std::mt19937_64 rng(35);
  const SystemModel m = testutil::random_model(rng, 2);
  const GammaMatrix g = testutil::random_gamma(rng);
  const FieldState fs = FieldState::photon_combo(g, fig1_pulse());
  const auto sol = solve(m, fs, testutil::random_density(rng, 2), TimeGrid::make(1e-3, 10.0));
  double tr = 0.0, herm = 0.0;
  for (const auto& s : sol) {
    tr = std::max({tr, std::abs(trace(s[0]) - 1.0), std::abs(trace(s[1]) - g.g01),
                   std::abs(trace(s[2]) - g.g10()), std::abs(trace(s[3]) - g.g11)});
    herm = std::max({herm, max_abs(s[0] - s[0].adjoint()), max_abs(s[3] - s[3].adjoint()),
                     max_abs(s[2] - s[1].adjoint())});
  }
  CHECK(tr < 1e-8);
  CHECK(herm < 1e-10);

  const auto coh = solve(m, fig2_field(), testutil::random_density(rng, 2),
                         TimeGrid::make(1e-3, 10.0));
  double ctr = 0.0;
  for (const auto& s : coh)
    ctr = std::max({ctr, std::abs(trace(s[0]) - 0.5), std::abs(trace(s[1]) - 0.5)});
  CHECK(ctr < 1e-8);
}

TEST_CASE("single-photon excitation peak") {
  GammaMatrix one;
  one.g00 = 0.0;
  one.g11 = 1.0;
  const FieldState fs = FieldState::photon_combo(one, fig1_pulse());
  const TimeGrid grid = TimeGrid::make(1e-3, 8.0);
  const auto sol = solve(SystemModel::two_level_decay(1.0), fs, projector(2, 0), grid);
  double peak = 0.0, t_peak = 0.0;
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const double p = sol[n][0](1, 1).real();
    if (p > peak) peak = p, t_peak = grid.t(static_cast<int>(n));
  }
  CHECK(peak > 0.78);
  CHECK(peak < 0.82);
  CHECK(t_peak > 3.0);
  CHECK(t_peak < 4.5);
}

TEST_CASE("coherent mixture equations") {
  SUBCASE("constant drive with S = I is the driven Lindblad equation") {
    const cplx a(0.4, -0.3);
    const Envelope c = Envelope::tabulated({0.0, 10.0}, {a, a}, Envelope::Mode::coherent);
    std::mt19937_64 rng(36);
    const Operator H = testutil::random_hermitian(rng, 2);
    const Operator L = testutil::random_matrix(rng, 2);
    const SystemModel m = SystemModel::make(H, L, identity(2));
    const Operator rho = testutil::random_density(rng, 2);
    const HierarchyState st{Layout::coherent, {rho}};
    const HierarchyState d = rhs_coherent_mixture(st, 1.0, m, {c}, {1.0});
    const Operator ref = lindblad_apply(m, rho) + a * commutator(rho, L.adjoint()) +
                         std::conj(a) * commutator(L, rho);
    CHECK(max_abs(d[0] - ref) < kExactTol);
    CHECK_THROWS_AS(rhs_coherent_mixture(st, 1.0, m, {c, c}, {0.5, 0.5}), Error);
  }
  SUBCASE("two pulses give two excitation humps") {
    const TimeGrid grid = TimeGrid::make(1e-3, 9.0);
    const auto sol = solve(SystemModel::two_level_decay(1.0), fig2_field(),
                           projector(2, 0), grid);
    std::vector<double> p;
    for (const auto& s : sol) p.push_back((s[0] + s[1])(1, 1).real());
    std::vector<double> maxima;
    for (std::size_t n = 1; n + 1 < p.size(); ++n)
      if (p[n] > p[n - 1] && p[n] >= p[n + 1] && p[n] > 0.05) maxima.push_back(grid.t(static_cast<int>(n)));
    REQUIRE(maxima.size() == 2);
    CHECK(std::abs(maxima[0] - 3.0) < 1.0);
    CHECK(std::abs(maxima[1] - 5.0) < 1.0);
  }
  SUBCASE("unit-trace conversion round trip") {
    std::mt19937_64 rng(37);
    const HierarchyState st{Layout::coherent,
                            {0.3 * testutil::random_density(rng, 2),
                             0.7 * testutil::random_density(rng, 2)}};
    const auto unit = coherent_unit_trace(st, {0.3, 0.7});
    CHECK(std::abs(trace(unit[0]) - 1.0) < kExactTol);
    CHECK(max_abs_diff(coherent_from_unit_trace(unit, {0.3, 0.7}), st) < kExactTol);
  }
}

TEST_CASE("RK4 integrator") {
  const HierarchyState one{Layout::coherent, {Operator::Constant(1, 1, 1.0)}};
  SUBCASE("zero right-hand side") {
    const HierarchyRhs zero = [](const HierarchyState& s, double) { return 0.0 * s; };
    const auto sol = integrate_deterministic(zero, one, TimeGrid::make(0.1, 1.0));
    CHECK(sol.size() == 11);
    for (const auto& s : sol) CHECK(s[0](0, 0) == cplx(1.0));
  }
  SUBCASE("exponential decay") {
    const HierarchyRhs decay = [](const HierarchyState& s, double) { return -1.0 * s; };
    const auto sol = integrate_deterministic(decay, one, TimeGrid::make(1e-3, 1.0));
    CHECK(std::abs(sol.back()[0](0, 0).real() - std::exp(-1.0)) < 1e-10);
  }
  SUBCASE("fourth-order self-convergence") {
    const SystemModel m = SystemModel::two_level_decay(1.0);
    const FieldState fs = FieldState::photon_combo(fig1_gamma(), fig1_pulse());
    auto final_state = [&](double dt) {
      return solve(m, fs, projector(2, 0), TimeGrid::make(dt, 6.0)).back();
    };
    const HierarchyState ref = final_state(0.005);
    const double e1 = max_abs_diff(final_state(0.1), ref);
    const double e2 = max_abs_diff(final_state(0.05), ref);
    CHECK(std::log2(e1 / e2) >= 3.8);
  }
  SUBCASE("NaN is reported with its time") {
    const HierarchyRhs bad = [](const HierarchyState& s, double t) {
      HierarchyState d = 0.0 * s;
      if (t > 0.25) d[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
      return d;
    };
    try {
      integrate_deterministic(bad, one, TimeGrid::make(0.1, 1.0));
      FAIL("expected a numeric error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::numeric);
      CHECK(std::string(e.what()).find("0.3") != std::string::npos);
    }
  }
}

TEST_CASE("expected output rates") {
  std::mt19937_64 rng(38);
  const Envelope xi = fig1_pulse();
  SUBCASE("no coupling: the input flux passes through") {
    GammaMatrix g = testutil::random_gamma(rng);
    const FieldState fs = FieldState::photon_combo(g, xi);
    const SystemModel m = SystemModel::make(Operator::Zero(2, 2), Operator::Zero(2, 2), identity(2));
    const HierarchyState st = initial_state(testutil::random_density(rng, 2), fs);
    CHECK(std::abs(expected_count_rate(st, 3.2, m, fs) - g.g11 * std::norm(xi.eval(3.2))) < kExactTol);
  }
  SUBCASE("vacuum input") {
    const FieldState vac = FieldState::photon_combo(GammaMatrix{}, xi);
    const SystemModel m = testutil::random_model(rng, 2);
    const Operator rho = testutil::random_density(rng, 2);
    const HierarchyState st = initial_state(rho, vac);
    CHECK(std::abs(expected_count_rate(st, 3.0, m, vac) -
                   (m.L.adjoint() * m.L * rho).trace().real()) < kExactTol);
    Operator diag = Operator::Zero(2, 2);
    diag(0, 0) = 0.3;
    diag(1, 1) = 0.7;
    const SystemModel decay = SystemModel::two_level_decay(1.0);
    CHECK(std::abs(expected_quadrature_rate(initial_state(diag, vac), 3.0, decay, vac)) < kExactTol);
    CHECK(std::abs(expected_quadrature_rate(st, 3.0, decay, vac) - 2.0 * rho(0, 1).real()) <
          kExactTol);
  }
  SUBCASE("mismatched state and field") {
    const FieldState vac = FieldState::photon_combo(GammaMatrix{}, xi);
    const HierarchyState coh{Layout::coherent, {projector(2, 0)}};
    CHECK_THROWS_AS(expected_count_rate(coh, 1.0, SystemModel::two_level_decay(1.0), vac), Error);
  }
  SUBCASE("full scenario rates agree with the extended system") {
    const SystemModel m = SystemModel::two_level_decay(1.0);
    for (const FieldState& fs :
         {FieldState::photon_combo(fig1_gamma(), xi), fig2_field()}) {
      const TimeGrid grid = TimeGrid::make(1e-3, 3.0);
      const auto red = solve(m, fs, projector(2, 0), grid).back();
      const AncillaGenerator gen = AncillaGenerator::from_field(fs);
      const auto ext = integrate_extended(initial_extended_state(projector(2, 0), fs), grid, m, gen).back();
      CHECK(std::abs(expected_count_rate(red, 3.0, m, fs) - extended_intensity(ext, 3.0, m, gen)) < 1e-8);
      CHECK(std::abs(expected_quadrature_rate(red, 3.0, m, fs) - extended_vt(ext, 3.0, m, gen)) < 1e-8);
    }
  }
}
