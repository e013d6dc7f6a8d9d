#include "ncfilter/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "ncfilter/error.hpp"

namespace ncfilter {
namespace {

// Kronrod abscissae on [0, 1]; odd indices are shared with the Gauss rule.
constexpr std::array<double, 8> kXk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXk[j];
    const double fsum = f(c - dx) + f(c + dx);
    kronrod += kWk[j] * fsum;
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  return Segment{a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol, double rel_tol,
                           int max_intervals) {
  if (!std::isfinite(a) || !std::isfinite(b))
    fail(ErrorCode::invalid_argument, "integrate: bounds must be finite");
  if (a == b) return {};
  const double sign = b < a ? -1.0 : 1.0;
  if (b < a) std::swap(a, b);

  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  double total = first.value;
  double err = first.error;
  heap.push(first);
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) &&
         static_cast<int>(heap.size()) < max_intervals) {
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      heap.push(worst);
      break;
    }
    const Segment left = gk15(f, worst.a, mid);
    const Segment right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to avoid drift from the incremental updates.
  double sum = 0.0, esum = 0.0;
  const int n = static_cast<int>(heap.size());
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(sum))
    fail(ErrorCode::numeric, "integrate: non-finite integrand");
  return {sign * sum, esum, n};
}

QuadratureResult integrate_to_infinity(const std::function<double(double)>& f,
                                       double a, double abs_tol,
                                       double rel_tol) {
  auto g = [&](double x) {
    const double one_minus = 1.0 - x;
    const double t = a + x / one_minus;
    return f(t) / (one_minus * one_minus);
  };
  return integrate(g, 0.0, 1.0, abs_tol, rel_tol);
}

}  // namespace ncfilter
