#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ncfilter/envelope.hpp"
#include "ncfilter/error.hpp"
#include "ncfilter/quadrature.hpp"

using namespace ncfilter;
using boost::math::quadrature::gauss_kronrod;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Independent reference for integral of |env|^2 over [a, b].
double gk_sq(const Envelope& e, double a, double b) {
  auto f = [&](double t) { return std::norm(e.eval(t)); };
  return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

Envelope fig1_pulse() { return Envelope::gaussian(1.46, 3.0, Envelope::Mode::unit_norm); }

}  // namespace

TEST_CASE("gaussian values") {
  const Envelope a = Envelope::gaussian(2.4, 3.0, Envelope::Mode::coherent);
  const long double peak = std::pow(2.0L * 2.4L * 2.4L / std::numbers::pi_v<long double>, 0.25L);
  CHECK(std::abs(a.eval(3.0) - static_cast<double>(peak)) < 1e-14);
  CHECK(std::abs(peak - 1.383807L) < 1e-6L);

  const Envelope xi = fig1_pulse();
  // amplitude relative to the peak drops by exp(-omega^2 x^2 / 4)
  const double x = 0.7;
  CHECK(std::abs(xi.eval(3.0 + x) / xi.eval(3.0) -
                 std::exp(-1.46 * 1.46 * x * x / 4.0)) < 1e-14);
  // envelope far out in the tails
  CHECK(std::norm(xi.eval(3.0 + 10.0 / 1.46)) < 1e-10 * std::norm(xi.eval(3.0)));
  CHECK_THROWS_AS(xi.eval(-1e-3), Error);
}

TEST_CASE("unit-norm gaussian is normalized on the half line") {
  const Envelope xi = fig1_pulse();
  CHECK(std::abs(gk_sq(xi, 0.0, kInf) - 1.0) < 1e-10);
  CHECK(std::abs(xi.norm() - 1.0) < 1e-12);
  // pulse centred at the origin: half the Gaussian weight is cut off
  const Envelope c0 = Envelope::gaussian(1.0, 0.0, Envelope::Mode::unit_norm);
  CHECK(std::abs(c0.normalization() - std::sqrt(0.5)) < 1e-14);
  CHECK(std::abs(gk_sq(c0, 0.0, kInf) - 1.0) < 1e-10);
}

TEST_CASE("tail integral against an independent quadrature") {
  const Envelope xi = fig1_pulse();
  CHECK(std::abs(xi.tail_integral(0.0) - 1.0) < 1e-12);
  CHECK(std::abs(xi.tail_integral(3.0) - 0.5) < 1e-3);
  CHECK(xi.tail_integral(60.0) < 1e-300);
  for (double t : {0.5, 1.7, 2.9, 3.0, 3.8, 5.5, 8.0}) {
    const double ref = gk_sq(xi, t, kInf);
    CHECK(std::abs(xi.tail_integral(t) - ref) < 1e-10);
  }
  const Envelope a = Envelope::gaussian(2.4, 5.0, Envelope::Mode::coherent);
  for (double t : {0.0, 4.0, 5.2, 6.5})
    CHECK(std::abs(a.tail_integral(t) - gk_sq(a, t, kInf)) < 1e-10);
}

TEST_CASE("tail integral properties") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  const Envelope xi = fig1_pulse();
  for (int rep = 0; rep < 100; ++rep) {
    double s = u(rng), t = u(rng);
    if (s > t) std::swap(s, t);
    CHECK(xi.tail_integral(s) >= xi.tail_integral(t));
    // integral over [0, t] plus the tail is the norm
    CHECK(std::abs(gk_sq(xi, 0.0, t) + xi.tail_integral(t) - xi.norm()) < 1e-8);
  }
  // d/dt tail = -|xi|^2
  for (double t : {1.0, 2.5, 3.3, 4.9}) {
    const double h = 1e-4;
    const double deriv = (xi.tail_integral(t + h) - xi.tail_integral(t - h)) / (2 * h);
    CHECK(std::abs(deriv + std::norm(xi.eval(t))) < 1e-6);
  }
}

TEST_CASE("lambda coupling") {
  const Envelope xi = fig1_pulse();
  CHECK(std::abs(xi.lambda(0.0) - xi.eval(0.0)) < 1e-15);
  for (double t : {0.3, 2.0, 3.0, 4.5, 6.0, 8.0}) {
    const cplx lam = xi.lambda(t);
    CHECK(std::abs(lam * std::sqrt(xi.tail_integral(t)) - xi.eval(t)) <
          1e-12 * std::abs(xi.eval(t)) + 1e-300);
  }
  // below the clamp threshold the coupling is switched off
  const double late = 3.0 + 9.0;
  REQUIRE(xi.tail_integral(late) < kTailEps);
  CHECK(xi.lambda(late) == cplx(0.0));
  CHECK(xi.lambda(4.0, 1.0) == cplx(0.0));
  const Envelope zero =
      Envelope::tabulated({0.0, 1.0}, {0.0, 0.0}, Envelope::Mode::coherent);
  CHECK(zero.lambda(0.5) == cplx(0.0));
}

TEST_CASE("tabulated envelopes") {
  SUBCASE("zeros") {
    const Envelope z = Envelope::tabulated({0.0, 1.0, 2.0}, {0.0, 0.0, 0.0},
                                           Envelope::Mode::coherent);
    for (double t : {0.0, 0.5, 1.5, 3.0}) CHECK(z.eval(t) == cplx(0.0));
    CHECK(z.tail_integral(0.0) == 0.0);
  }
  SUBCASE("interpolated profile and its tail") {
    // triangle with unit norm: values h at the peak, integral h^2 * 2/3 = 1
    const double h = std::sqrt(1.5);
    const Envelope tri = Envelope::tabulated(
        {0.0, 1.0, 2.0}, {0.0, cplx(0.0, h), 0.0}, Envelope::Mode::unit_norm);
    CHECK(std::abs(tri.eval(0.5) - cplx(0.0, 0.5 * h)) < 1e-15);
    CHECK(tri.eval(2.5) == cplx(0.0));
    for (double t : {0.0, 0.3, 1.0, 1.4, 1.99}) {
      double ref = 0.0;
      if (t < 1.0) ref += gk_sq(tri, t, 1.0);
      ref += gk_sq(tri, std::max(t, 1.0), 2.0);
      CHECK(std::abs(tri.tail_integral(t) - ref) < 1e-12);
    }
    CHECK(std::abs(pulse_energy(tri) - 1.0) < 1e-10);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(Envelope::tabulated({0.0, 1.0}, {2.0, 2.0}, Envelope::Mode::unit_norm),
                    Error);
    CHECK_THROWS_AS(Envelope::tabulated({1.0, 0.5}, {0.0, 0.0}, Envelope::Mode::coherent),
                    Error);
    CHECK_THROWS_AS(Envelope::tabulated({-1.0, 0.5}, {0.0, 0.0}, Envelope::Mode::coherent),
                    Error);
    CHECK_THROWS_AS(Envelope::tabulated({0.0}, {0.0}, Envelope::Mode::coherent), Error);
  }
}

TEST_CASE("pulse energy by quadrature") {
  const Envelope a0 = Envelope::gaussian(2.4, 3.0, Envelope::Mode::coherent);
  const Envelope a1 = Envelope::gaussian(2.4, 5.0, Envelope::Mode::coherent);
  // full-line integral is 2; the part before t = 0 is negligible here
  const double ref0 = 2.0 * 0.5 * std::erfc(-2.4 * 3.0 / std::numbers::sqrt2);
  CHECK(std::abs(pulse_energy(a0) - ref0) < 1e-10);
  CHECK(std::abs(pulse_energy(a1) - 2.0) < 1e-10);
  CHECK(std::abs(pulse_energy(fig1_pulse()) - 1.0) < 1e-10);
}

TEST_CASE("field states") {
  GammaMatrix g;
  g.g00 = 0.5;
  g.g11 = 0.5;
  g.g01 = 0.6;  // |g01|^2 > g00 g11
  CHECK_THROWS_AS(g.validate(), Error);
  g.g01 = 0.5;
  CHECK_NOTHROW(g.validate());
  g.g11 = 0.6;
  CHECK_THROWS_AS(g.validate(), Error);

  const Envelope a = Envelope::gaussian(2.4, 3.0, Envelope::Mode::coherent);
  CHECK_THROWS_AS(FieldState::coherent_mixture({0.5, 0.4}, {a, a}), Error);
  CHECK_THROWS_AS(FieldState::coherent_mixture({1.0}, {a, a}), Error);
  CHECK_THROWS_AS(FieldState::photon_combo(GammaMatrix{}, a), Error);

  GammaMatrix one;
  one.g00 = 0.0;
  one.g11 = 1.0;
  const FieldState p = FieldState::photon_combo(one, fig1_pulse());
  CHECK(std::abs(photon_flux(p, 3.0) - std::norm(fig1_pulse().eval(3.0))) < 1e-15);
  const FieldState vac = FieldState::photon_combo(GammaMatrix{}, fig1_pulse());
  CHECK(photon_flux(vac, 3.0) == 0.0);
  const Envelope b = Envelope::gaussian(2.4, 5.0, Envelope::Mode::coherent);
  const FieldState mix = FieldState::coherent_mixture({0.25, 0.75}, {a, b});
  CHECK(std::abs(photon_flux(mix, 4.0) -
                 (0.25 * std::norm(a.eval(4.0)) + 0.75 * std::norm(b.eval(4.0)))) <
        1e-15);
}

TEST_CASE("adaptive quadrature") {
  auto f = [](double t) { return std::exp(-t) * std::cos(3 * t); };
  const auto r = integrate(f, 0.0, 5.0);
  const double ref = gauss_kronrod<double, 61>::integrate(f, 0.0, 5.0, 15, 1e-15);
  CHECK(std::abs(r.value - ref) < 1e-12);
  const auto inf = integrate_to_infinity([](double t) { return std::exp(-2 * t); }, 1.0);
  CHECK(std::abs(inf.value - 0.5 * std::exp(-2.0)) < 1e-12);
}
