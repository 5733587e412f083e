#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <type_traits>
#include <utility>
#include <vector>

namespace rhh {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kSqrtPi = 1.772453850905516027298167483341145183;

namespace detail {
inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const cplx& v) { return std::abs(v); }
}  // namespace detail

template <class T>
struct QuadResult {
  T value{};
  double error = 0.0;
  std::size_t evaluations = 0;
};

// 15-point Gauss-Kronrod rule with embedded 7-point Gauss error estimate.
template <class F>
auto gauss_kronrod15(F&& f, double a, double b) {
  using T = std::decay_t<decltype(f(a))>;
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * wk[7];
  T gauss = fc * wg[3];
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * xk[i];
    const T f1 = f(center - dx);
    const T f2 = f(center + dx);
    kronrod += (f1 + f2) * wk[i];
    if (i % 2 == 1) gauss += (f1 + f2) * wg[i / 2];
  }
  QuadResult<T> r;
  r.value = kronrod * half;
  r.error = detail::magnitude((kronrod - gauss) * half);
  r.evaluations = 15;
  return r;
}

// Globally adaptive Gauss-Kronrod: the panel with the largest error estimate
// is bisected until the summed estimate meets abs_tol, no panel can be split
// further (max_depth bisections), or max_panels is reached. The sequence of
// splits is deterministic, so repeated calls visit the same nodes.
template <class F>
auto integrate(F&& f, double a, double b, double abs_tol, int max_depth = 40,
               std::size_t max_panels = 20000) {
  using T = std::decay_t<decltype(f(a))>;
  struct Panel {
    double a, b;
    QuadResult<T> q;
    int depth;
  };
  auto worse = [](const Panel& x, const Panel& y) { return x.q.error < y.q.error; };
  std::vector<Panel> heap;
  std::vector<Panel> done;
  QuadResult<T> acc;
  heap.push_back({a, b, gauss_kronrod15(f, a, b), 0});
  acc.evaluations = 15;
  double total_error = heap.front().q.error;
  while (!heap.empty() && total_error > abs_tol && heap.size() + done.size() < max_panels) {
    std::pop_heap(heap.begin(), heap.end(), worse);
    Panel p = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    if (p.depth >= max_depth || !(mid > p.a && mid < p.b)) {
      done.push_back(p);
      continue;
    }
    Panel left{p.a, mid, gauss_kronrod15(f, p.a, mid), p.depth + 1};
    Panel right{mid, p.b, gauss_kronrod15(f, mid, p.b), p.depth + 1};
    acc.evaluations += 30;
    total_error += left.q.error + right.q.error - p.q.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
  }
  // Sum in position order so the result does not depend on heap layout.
  done.insert(done.end(), heap.begin(), heap.end());
  std::sort(done.begin(), done.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  for (const auto& p : done) {
    acc.value += p.q.value;
    acc.error += p.q.error;
  }
  return acc;
}

namespace detail {
inline constexpr int kChebDegree = 64;

struct ChebyshevRule {
  std::array<double, 2 * kChebDegree> cosines{};
  ChebyshevRule() {
    for (int m = 0; m < 2 * kChebDegree; ++m) cosines[m] = std::cos(kPi * m / kChebDegree);
  }
};

inline const ChebyshevRule& chebyshev_rule() {
  static const ChebyshevRule rule;
  return rule;
}

// One panel: Chebyshev coefficients of f from 65 Lobatto samples; the
// integral is exact for the interpolant and the error is read off the
// trailing coefficients.
template <class F>
QuadResult<double> chebyshev_panel(F& f, double a, double b) {
  constexpr int n = kChebDegree;
  const auto& rule = chebyshev_rule();
  std::array<double, n + 1> values{};
  for (int j = 0; j <= n; ++j) values[j] = f(0.5 * (a + b) + 0.5 * (b - a) * rule.cosines[j]);
  QuadResult<double> r;
  r.evaluations = n + 1;
  double integral = 0.0, tail = 0.0;
  for (int k = 0; k <= n; ++k) {
    double c = 0.0;
    for (int j = 0; j <= n; ++j) {
      const double term = values[j] * rule.cosines[(j * k) % (2 * n)];
      c += (j == 0 || j == n) ? 0.5 * term : term;
    }
    c *= 2.0 / n;
    if (k == 0 || k == n) c *= 0.5;
    if (k % 2 == 0) integral += c * 2.0 / (1.0 - static_cast<double>(k) * k);
    if (k >= n - 8) tail += std::abs(c);
  }
  r.value = 0.5 * (b - a) * integral;
  r.error = (b - a) * tail;
  return r;
}
}  // namespace detail

// Globally adaptive Clenshaw-Curtis on 65-point panels, for smooth but
// oscillatory real integrands: a panel resolves roughly a dozen oscillations.
template <class F>
QuadResult<double> integrate_chebyshev(F&& f, double a, double b, double abs_tol,
                                       int max_depth = 30, std::size_t max_panels = 5000) {
  struct Panel {
    double a, b;
    QuadResult<double> q;
    int depth;
  };
  auto worse = [](const Panel& x, const Panel& y) { return x.q.error < y.q.error; };
  std::vector<Panel> heap, done;
  QuadResult<double> acc;
  heap.push_back({a, b, detail::chebyshev_panel(f, a, b), 0});
  acc.evaluations = heap.front().q.evaluations;
  double total_error = heap.front().q.error;
  while (!heap.empty() && total_error > abs_tol && heap.size() + done.size() < max_panels) {
    std::pop_heap(heap.begin(), heap.end(), worse);
    Panel p = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    if (p.depth >= max_depth || !(mid > p.a && mid < p.b)) {
      done.push_back(p);
      continue;
    }
    Panel left{p.a, mid, detail::chebyshev_panel(f, p.a, mid), p.depth + 1};
    Panel right{mid, p.b, detail::chebyshev_panel(f, mid, p.b), p.depth + 1};
    acc.evaluations += left.q.evaluations + right.q.evaluations;
    total_error += left.q.error + right.q.error - p.q.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
  }
  done.insert(done.end(), heap.begin(), heap.end());
  std::sort(done.begin(), done.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  for (const auto& p : done) {
    acc.value += p.q.value;
    acc.error += p.q.error;
  }
  return acc;
}

// phi1(q) = (1 - e^{-q}) / q and phi2(q) = (q - 1 + e^{-q}) / q^2, the weights
// of exponential integration against constant and linearly varying forcing.
inline double phi1(double q) {
  if (q < 0.1) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 10; ++k) {
      term *= -q / (k + 1);
      sum += term;
    }
    return sum;
  }
  return -std::expm1(-q) / q;
}

inline double phi2(double q) {
  if (q < 0.1) {
    // sum_k (-q)^k / (k+2)!
    double term = 0.5, sum = 0.5;
    for (int k = 1; k < 10; ++k) {
      term *= -q / (k + 2);
      sum += term;
    }
    return sum;
  }
  return (q + std::expm1(-q)) / (q * q);
}

// Coefficients of one exponential-integrator step of y' = -x y + f(t) with f
// linear over the step: y1 = decay * y0 + w_start * f0 + w_end * f1.
struct ExpStep {
  double decay = 1.0;
  double w_start = 0.0;
  double w_end = 0.0;
};

inline ExpStep exp_step(double rate, double h) {
  const double q = rate * h;
  const double p1 = phi1(q);
  const double p2 = phi2(q);
  return {std::exp(-q), h * (p1 - p2), h * p2};
}

}  // namespace rhh
