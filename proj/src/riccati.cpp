#include "rhh/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rhh/errors.hpp"
#include "rhh/numerics.hpp"

namespace rhh {

double HForcing::exp_moment(double x) const {
  const std::size_t n = intervals();
  const double h = delta / static_cast<double>(n);
  const double q = x * h;
  const double w_left = h * phi2(q);
  const double w_right = h * (phi1(q) - phi2(q));
  const double step_decay = std::exp(-q);
  double decay = 1.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum += decay * (w_left * at_node(k) + w_right * at_node(k + 1));
    decay *= step_decay;
    if (decay < 1e-300) break;
  }
  return sum;
}

HForcing make_h_forcing(const ModelParams& params, const JumpLaw& law,
                        const MultiFactorKernel& kn, ResolventMode mode, std::size_t intervals,
                        double delta) {
  if (intervals == 0) throw ValidationError("h forcing needs at least one interval");
  HForcing f;
  f.delta = delta;
  f.c1 = leverage_constants(params, law).c1;
  f.scale = -1e4 * (2.0 / delta) * f.c1;
  std::vector<double> grid(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k)
    grid[k] = delta * static_cast<double>(k) / static_cast<double>(intervals);
  if (mode == ResolventMode::multifactor) {
    f.resolvent = resolvent_one(params.b, kn, grid, intervals);
  } else {
    f.resolvent.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double t = grid[k];
      f.resolvent[k] = params.alpha == 1.0
                           ? std::exp(params.b * t)
                           : mittag_leffler(params.alpha, 1.0, params.b * std::pow(t, params.alpha));
    }
  }
  return f;
}

double h_eval(double t, const HForcing& f) {
  if (t < 0.0) throw ValidationError("h is defined for t >= 0");
  if (t > f.delta) return 0.0;
  // r is tabulated at s = delta - t.
  const double s = f.delta - t;
  const std::size_t n = f.intervals();
  const double pos = s / f.delta * static_cast<double>(n);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), n - 1);
  const double frac = pos - static_cast<double>(i);
  return f.scale * ((1.0 - frac) * f.resolvent[i] + frac * f.resolvent[i + 1]);
}

namespace {

// The factors advance by the exponential rule
// y_j <- decay_j y_j + w_start_j f(v_n) + w_end_j f(v_{n+1}). The end value
// v_{n+1} = sum_j m_j y_j enters its own forcing, so it solves the scalar
// equation v = B + C f(v). Alongside the values the solver accumulates
// int_0^T g0(T - r) f(v(r)) dr with the trapezoid rule on the steps.
template <class Forcing, class Slope>
RiccatiSolution integrate_factors(cplx w, RiccatiKind kind, const MultiFactorKernel& kn,
                                  const InitialCurve& curve, const RiccatiGrid& grid,
                                  const RiccatiOptions& opt, std::vector<cplx> initial,
                                  double quadratic, Forcing&& forcing, Slope&& slope) {
  if (!(grid.t_end > 0.0) || grid.steps == 0) throw ValidationError("invalid Riccati grid");
  const std::size_t n = kn.size();
  const std::size_t m = grid.steps;
  const double h = grid.step();
  const double T = grid.t_end;

  std::vector<ExpStep> full(n), sub(n);
  double full_weight = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    full[j] = exp_step(kn.rates[j], h);
    full_weight += kn.weights[j] * full[j].w_end;
  }

  RiccatiSolution sol;
  sol.grid = grid;
  sol.kind = kind;
  sol.w = w;
  sol.factors = n;
  sol.values.resize(m + 1);
  if (opt.store_factors) sol.factor_values.resize((m + 1) * n);

  std::vector<cplx> y = std::move(initial);
  auto combine = [&](const std::vector<cplx>& v) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kn.weights[j] * v[j];
    return s;
  };
  const double cap = opt.divergence_cap * std::max(1.0, std::abs(combine(y)));
  auto fail = [&](const std::string& what, double t, double achieved) {
    std::ostringstream msg;
    msg << what << " at t = " << t << " for w = " << w;
    throw NumericalError(msg.str(), achieved);
  };
  auto check = [&](double t, cplx value) {
    if (!(std::abs(value) <= cap)) {
      std::ostringstream msg;
      msg << "Riccati solution diverged (|value| = " << std::abs(value) << " > cap " << cap << ")";
      fail(msg.str(), t, std::abs(value));
    }
    if (value.real() > 0.0) {
      if (value.real() > opt.positivity_tolerance) {
        std::ostringstream msg;
        msg << "Riccati solution left the left half-plane (Re = " << value.real() << ")";
        fail(msg.str(), t, value.real());
      }
      sol.max_positive_real = std::max(sol.max_positive_real, value.real());
    }
  };
  auto record = [&](std::size_t k, cplx value) {
    sol.values[k] = value;
    if (opt.store_factors) std::copy(y.begin(), y.end(), sol.factor_values.begin() + k * n);
  };

  // Advances y over [t, t + hs] with the given coefficients; returns f at the end.
  auto advance = [&](const std::vector<ExpStep>& co, double c, cplx f0, cplx prev, double t) {
    cplx base = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = co[j].decay * y[j] + co[j].w_start * f0;
      base += kn.weights[j] * y[j];
    }
    // Newton on a quadratic model of the forcing (exact quadratic term,
    // linearized remainder), taking the root that continues from v = base as
    // c shrinks to zero. Without jumps the first iterate is exact.
    cplx v = base;
    try {
      forcing(v);
    } catch (const DomainError&) {
      v = prev;
    }
    bool converged = false;
    for (int it = 0; it < 100 && !converged; ++it) {
      const cplx g = v - base - c * forcing(v);
      if (std::abs(g) <= 1e-15 * (1.0 + std::abs(v))) {
        converged = true;
        break;
      }
      const cplx qa = -c * quadratic;
      const cplx qb = 1.0 - c * slope(v);
      cplx root = std::sqrt(qb * qb - 4.0 * qa * g);
      if ((std::conj(qb) * root).real() < 0.0) root = -root;
      const cplx delta = -2.0 * g / (qb + root);
      double damping = 1.0;
      for (int back = 0;; ++back) {
        const cplx trial = v + damping * delta;
        try {
          forcing(trial);
          v = trial;
          break;
        } catch (const DomainError&) {
          if (back > 60) fail("implicit Riccati step left the domain of the jump transform", t, 0.0);
          damping *= 0.5;
        }
      }
      if (std::abs(damping * delta) <= 1e-15 * (1.0 + std::abs(v))) converged = true;
    }
    if (!converged) fail("implicit Riccati step did not converge", t, std::abs(v));
    const cplx f1 = forcing(v);
    for (std::size_t j = 0; j < n; ++j) y[j] += co[j].w_end * f1;
    return f1;
  };

  // The first interval is graded geometrically toward t = 0: phi starts at
  // w int h e^{-x s} ds and collapses on a time scale of order |w|^{-1/alpha},
  // after which |phi(t)| ~ 1 / (c int_0^t K). Substeps of ratio two keep
  // C |f'| bounded independently of w, and because the pattern does not depend
  // on w the transforms stay smooth in w.
  constexpr int kLayerLevels = 40;
  cplx value = combine(y);
  check(0.0, value);
  record(0, value);
  cplx f_now = forcing(value);
  cplx conv = 0.0;
  auto substep = [&](double t, double t_next) {
    const double hs = t_next - t;
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sub[j] = exp_step(kn.rates[j], hs);
      c += kn.weights[j] * sub[j].w_end;
    }
    const cplx f1 = advance(sub, c, f_now, value, t);
    conv += 0.5 * hs * (curve(T - t) * f_now + curve(T - t_next) * f1);
    f_now = f1;
    value = combine(y);
    check(t_next, value);
  };
  {
    double t = 0.0;
    for (int level = kLayerLevels; level >= 0; --level) {
      const double t_next = std::ldexp(h, -level);
      substep(t, t_next);
      t = t_next;
    }
    record(1, value);
  }
  for (std::size_t k = 1; k < m; ++k) {
    const double t = grid.time(k);
    const double t_end = grid.time(k + 1);
    const cplx f1 = advance(full, full_weight, f_now, value, t);
    conv += 0.5 * (t_end - t) * (curve(T - t) * f_now + curve(T - t_end) * f1);
    f_now = f1;
    value = combine(y);
    check(t_end, value);
    record(k + 1, value);
  }
  sol.convolution = conv;
  return sol;
}

}  // namespace

RiccatiSolution solve_psi(cplx w, const MultiFactorKernel& kn, const ModelParams& params,
                          const JumpLaw& law, const RiccatiGrid& grid,
                          const RiccatiOptions& options) {
  if (w.real() < 0.0 || w.real() > 1.0)
    throw DomainError("log-return transform needs Re w in [0, 1]");
  auto forcing = [&](cplx v) { return F_fn(w, v, params, law); };
  auto slope = [&](cplx v) { return F_dv(w, v, params, law); };
  return integrate_factors(w, RiccatiKind::psi, kn, InitialCurve(params), grid, options,
                           std::vector<cplx>(kn.size(), 0.0), 0.5 * params.c, forcing, slope);
}

RiccatiSolution solve_phi(cplx w, const MultiFactorKernel& kn, const ModelParams& params,
                          const JumpLaw& law, const HForcing& forcing_h, const RiccatiGrid& grid,
                          const RiccatiOptions& options) {
  if (w.real() > 0.0) throw DomainError("VIX^2 transform needs Re w <= 0");
  std::vector<cplx> initial(kn.size());
  for (std::size_t j = 0; j < kn.size(); ++j) initial[j] = w * forcing_h.exp_moment(kn.rates[j]);
  auto forcing = [&](cplx v) { return G_fn(v, params, law); };
  auto slope = [&](cplx v) { return G_du(v, params, law); };
  return integrate_factors(w, RiccatiKind::phi, kn, InitialCurve(params), grid, options, std::move(initial),
                           0.5 * params.c, forcing, slope);
}

void write_csv(std::ostream& os, const RiccatiSolution& sol) {
  os << "t,re,im\n";
  os.precision(17);
  for (std::size_t k = 0; k < sol.values.size(); ++k)
    os << sol.grid.time(k) << ',' << sol.values[k].real() << ',' << sol.values[k].imag() << '\n';
}

}  // namespace rhh
