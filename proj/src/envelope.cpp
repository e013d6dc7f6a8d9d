#include "ncfilter/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ncfilter/quadrature.hpp"

namespace ncfilter {
namespace {

double simpson_sq(const Envelope& env, double a, double b) {
  // |linear interpolant|^2 is quadratic on a segment, so Simpson is exact.
  const double fa = std::norm(env.eval(a));
  const double fm = std::norm(env.eval(0.5 * (a + b)));
  const double fb = std::norm(env.eval(b));
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

}  // namespace

Envelope Envelope::gaussian(double omega, double t_c, Mode mode) {
  if (!(omega > 0.0) || !std::isfinite(omega))
    fail(ErrorCode::invalid_argument, "gaussian envelope: omega must be > 0");
  if (!std::isfinite(t_c))
    fail(ErrorCode::invalid_argument, "gaussian envelope: t_c must be finite");
  using std::numbers::pi;
  Envelope e;
  e.kind_ = Kind::gaussian;
  e.mode_ = mode;
  e.omega_ = omega;
  e.t_c_ = t_c;
  if (mode == Mode::unit_norm) {
    // N^2 = (omega^2/2pi)^(1/2) * int_0^inf exp(-omega^2 (s - t_c)^2 / 2) ds
    e.normalization_ = std::sqrt(0.5 * std::erfc(-omega * t_c / std::sqrt(2.0)));
    e.amplitude_ = std::pow(omega * omega / (2.0 * pi), 0.25) / e.normalization_;
  } else {
    e.amplitude_ = std::pow(2.0 * omega * omega / pi, 0.25);
  }
  e.tail_scale_ = e.amplitude_ * e.amplitude_ * std::sqrt(2.0 * pi) / omega;
  e.norm_ = e.tail_integral(0.0);
  return e;
}

Envelope Envelope::tabulated(std::vector<double> times, std::vector<cplx> values,
                             Mode mode) {
  if (times.size() < 2 || times.size() != values.size())
    fail(ErrorCode::invalid_argument,
         "tabulated envelope: need >= 2 nodes and matching value count");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !std::isfinite(values[k].real()) ||
        !std::isfinite(values[k].imag()))
      fail(ErrorCode::invalid_argument, "tabulated envelope: non-finite entry");
    if (k > 0 && !(times[k] > times[k - 1]))
      fail(ErrorCode::invalid_argument,
           "tabulated envelope: grid must be strictly increasing");
  }
  if (times.front() < 0.0)
    fail(ErrorCode::invalid_argument, "tabulated envelope: times must be >= 0");

  Envelope e;
  e.kind_ = Kind::tabulated;
  e.mode_ = mode;
  e.times_ = std::move(times);
  e.values_ = std::move(values);
  const std::size_t n = e.times_.size();
  e.suffix_.assign(n, 0.0);
  for (std::size_t k = n - 1; k-- > 0;)
    e.suffix_[k] = e.suffix_[k + 1] + simpson_sq(e, e.times_[k], e.times_[k + 1]);
  e.norm_ = e.suffix_[0];
  if (mode == Mode::unit_norm && std::abs(e.norm_ - 1.0) > 1e-6)
    fail(ErrorCode::invalid_argument,
         "tabulated envelope: single-photon profile must be unit-norm, got " +
             std::to_string(e.norm_));
  return e;
}

cplx Envelope::eval(double t) const {
  if (t < 0.0 || std::isnan(t))
    fail(ErrorCode::invalid_argument, "envelope: t must be >= 0");
  if (kind_ == Kind::gaussian) {
    const double x = t - t_c_;
    return amplitude_ * std::exp(-0.25 * omega_ * omega_ * x * x);
  }
  if (t < times_.front() || t > times_.back()) return 0.0;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.end()) return values_.back();
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double u = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return values_[k] + u * (values_[k + 1] - values_[k]);
}

double Envelope::tail_integral(double t) const {
  if (t <= 0.0) t = 0.0;
  if (kind_ == Kind::gaussian)
    return tail_scale_ * 0.5 *
           std::erfc(omega_ * (t - t_c_) / std::numbers::sqrt2);
  if (t <= times_.front()) return suffix_.front();
  if (t >= times_.back()) return 0.0;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  return simpson_sq(*this, t, times_[k]) + suffix_[k];
}

cplx Envelope::lambda(double t, double eps) const {
  const cplx xi = eval(t);
  if (xi == 0.0) return 0.0;
  const double tail = tail_integral(t);
  if (tail < eps) return 0.0;
  return xi / std::sqrt(tail);
}

bool Envelope::operator==(const Envelope& o) const {
  return kind_ == o.kind_ && mode_ == o.mode_ && omega_ == o.omega_ &&
         t_c_ == o.t_c_ && times_ == o.times_ && values_ == o.values_;
}

void GammaMatrix::validate() const {
  if (!std::isfinite(g00) || !std::isfinite(g11) ||
      !std::isfinite(g01.real()) || !std::isfinite(g01.imag()))
    fail(ErrorCode::invalid_argument, "gamma: non-finite coefficient");
  if (g00 < 0.0 || g11 < 0.0)
    fail(ErrorCode::invalid_argument, "gamma: g00 and g11 must be >= 0");
  if (std::abs(g00 + g11 - 1.0) > 1e-12)
    fail(ErrorCode::invalid_argument, "gamma: g00 + g11 must equal 1");
  if (g00 * g11 - std::norm(g01) < -1e-12)
    fail(ErrorCode::invalid_argument,
         "gamma: not positive semidefinite (|g01|^2 > g00 g11)");
}

FieldState FieldState::photon_combo(GammaMatrix gamma, Envelope xi) {
  gamma.validate();
  if (xi.mode() != Envelope::Mode::unit_norm)
    fail(ErrorCode::invalid_argument,
         "photon_combo: envelope must be in unit-norm mode");
  return FieldState(PhotonCombo{gamma, std::move(xi)});
}

FieldState FieldState::coherent_mixture(std::vector<double> weights,
                                        std::vector<Envelope> alphas) {
  if (weights.empty() || weights.size() != alphas.size())
    fail(ErrorCode::invalid_argument,
         "coherent_mixture: need >= 1 component and one weight per envelope");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      fail(ErrorCode::invalid_argument, "coherent_mixture: weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    fail(ErrorCode::invalid_argument, "coherent_mixture: weights must sum to 1");
  return FieldState(CoherentMixture{std::move(weights), std::move(alphas)});
}

const PhotonCombo& FieldState::photon() const {
  if (!is_photon())
    fail(ErrorCode::invalid_argument, "field state is not a photon combination");
  return std::get<PhotonCombo>(v_);
}

const CoherentMixture& FieldState::coherent() const {
  if (!is_coherent())
    fail(ErrorCode::invalid_argument, "field state is not a coherent mixture");
  return std::get<CoherentMixture>(v_);
}

double photon_flux(const FieldState& fs, double t) {
  if (fs.is_photon()) {
    const auto& p = fs.photon();
    return p.gamma.g11 * std::norm(p.xi.eval(t));
  }
  const auto& c = fs.coherent();
  double flux = 0.0;
  for (std::size_t i = 0; i < c.weights.size(); ++i)
    flux += c.weights[i] * std::norm(c.alphas[i].eval(t));
  return flux;
}

double pulse_energy(const Envelope& env) {
  auto sq = [&](double t) { return std::norm(env.eval(t)); };
  if (env.kind() == Envelope::Kind::tabulated) {
    double total = 0.0;
    const auto& ts = env.times();
    for (std::size_t k = 0; k + 1 < ts.size(); ++k)
      total += integrate(sq, ts[k], ts[k + 1], 1e-14, 1e-13).value;
    return total;
  }
  // Split at the pulse centre so both halves are smooth and monotone.
  const double c = std::max(env.t_c(), 0.0);
  double total = c > 0.0 ? integrate(sq, 0.0, c, 1e-14, 1e-13).value : 0.0;
  total += integrate_to_infinity(sq, c, 1e-14, 1e-13).value;
  return total;
}

}  // namespace ncfilter
