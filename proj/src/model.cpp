#include "rhh/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rhh/errors.hpp"

namespace rhh {

namespace {

constexpr double kDomainMargin = 1e-9;

// e^x - 1 - x without cancellation for small |x|.
cplx expm1_minus_x(cplx x) {
  if (std::abs(x) < 0.05) {
    cplx term = x * x * 0.5;
    cplx sum = term;
    for (int k = 3; k < 12; ++k) {
      term *= x / static_cast<double>(k);
      sum += term;
    }
    return sum;
  }
  return std::exp(x) - 1.0 - x;
}

cplx expm1_c(cplx x) {
  if (std::abs(x) < 0.05) return expm1_minus_x(x) + x;
  return std::exp(x) - 1.0;
}

}  // namespace

void ModelParams::validate() const {
  std::ostringstream err;
  if (!(alpha > 0.5 && alpha <= 1.0)) err << "alpha must lie in (1/2, 1]; ";
  if (!(rho >= -1.0 && rho <= 1.0)) err << "rho must lie in [-1, 1]; ";
  if (!(c > 0.0)) err << "c must be positive; ";
  if (!(lambda_j >= 0.0)) err << "lambda must be nonnegative; ";
  if (!(beta >= 0.0)) err << "beta must be nonnegative; ";
  if (!(sigma0_sq >= 0.0)) err << "sigma0_sq must be nonnegative; ";
  if (!std::isfinite(b)) err << "b must be finite; ";
  if (!err.str().empty()) throw ValidationError("invalid model parameters: " + err.str());
}

double gamma_fn(double x) { return std::tgamma(x); }

JumpLaw JumpLaw::none() { return JumpLaw{}; }

JumpLaw JumpLaw::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw ValidationError("exponential jump law needs a positive rate");
  JumpLaw law;
  law.kind_ = Kind::exponential;
  law.rate_ = rate;
  return law;
}

JumpLaw JumpLaw::tabulated(std::vector<JumpNode> nodes) {
  JumpLaw law;
  law.kind_ = Kind::tabulated;
  double total = 0.0;
  for (const auto& n : nodes) {
    if (!(n.z > 0.0) || !std::isfinite(n.z))
      throw ValidationError("tabulated jump law: nodes must lie in (0, inf)");
    if (!(n.weight >= 0.0) || !std::isfinite(n.weight))
      throw ValidationError("tabulated jump law: weights must be nonnegative");
    total += n.weight;
    law.cumulative_.push_back(total);
  }
  law.nodes_ = std::move(nodes);
  return law;
}

JumpLaw JumpLaw::from_density(const std::function<double(double)>& density, double scale,
                              std::size_t n) {
  if (!(scale > 0.0)) throw ValidationError("jump law scale must be positive");
  std::vector<double> t, w;
  gauss_laguerre(n, t, w);
  std::vector<JumpNode> nodes;
  nodes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = scale * t[i];
    // w_i e^{t_i} recovers the plain integral of density over (0, inf).
    const double weight = scale * std::exp(std::log(w[i]) + t[i]) * density(z);
    nodes.push_back({z, weight});
  }
  return tabulated(std::move(nodes));
}

double JumpLaw::mass() const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: return 1.0;
    case Kind::tabulated: return cumulative_.empty() ? 0.0 : cumulative_.back();
  }
  return 0.0;
}

double JumpLaw::first_moment() const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: return 1.0 / rate_;
    case Kind::tabulated: {
      double s = 0.0;
      for (const auto& n : nodes_) s += n.weight * n.z;
      return s;
    }
  }
  return 0.0;
}

double JumpLaw::second_moment() const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: return 2.0 / (rate_ * rate_);
    case Kind::tabulated: {
      double s = 0.0;
      for (const auto& n : nodes_) s += n.weight * n.z * n.z;
      return s;
    }
  }
  return 0.0;
}

double JumpLaw::abscissa() const {
  if (kind_ == Kind::exponential) return rate_;
  return std::numeric_limits<double>::infinity();
}

cplx JumpLaw::compensated_mgf(cplx s) const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: {
      if (s.real() > rate_ - kDomainMargin) {
        std::ostringstream msg;
        msg << "jump integral diverges: Re s = " << s.real() << " >= rate " << rate_;
        throw DomainError(msg.str());
      }
      // int (e^{sz} - 1 - sz) rate e^{-rate z} dz = s^2 / (rate (rate - s))
      return s * s / (rate_ * (rate_ - s));
    }
    case Kind::tabulated: {
      cplx sum = 0.0;
      for (const auto& n : nodes_) sum += n.weight * expm1_minus_x(s * n.z);
      return sum;
    }
  }
  return 0.0;
}

cplx JumpLaw::compensated_mgf_prime(cplx s) const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: {
      if (s.real() > rate_ - kDomainMargin) {
        std::ostringstream msg;
        msg << "jump integral diverges: Re s = " << s.real() << " >= rate " << rate_;
        throw DomainError(msg.str());
      }
      const cplx d = rate_ - s;
      return s * (2.0 * rate_ - s) / (rate_ * d * d);
    }
    case Kind::tabulated: {
      cplx sum = 0.0;
      for (const auto& n : nodes_) sum += n.weight * n.z * expm1_c(s * n.z);
      return sum;
    }
  }
  return 0.0;
}

double JumpLaw::quantile(double u) const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::exponential: return -std::log1p(-u) / rate_;
    case Kind::tabulated: {
      const double target = u * mass();
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
      if (it == cumulative_.end()) --it;
      return nodes_[static_cast<std::size_t>(it - cumulative_.begin())].z;
    }
  }
  return 0.0;
}

void gauss_laguerre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n == 0) throw ValidationError("Gauss-Laguerre rule needs at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  using ld = long double;
  const ld nn = static_cast<ld>(n);
  ld z = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    // Initial guesses from the classical asymptotic recipe.
    if (i == 0) {
      z = 3.0L / (1.0L + 2.4L * nn);
    } else if (i == 1) {
      z += 15.0L / (1.0L + 2.5L * nn);
    } else {
      const ld ai = static_cast<ld>(i - 1);
      z += ((1.0L + 2.55L * ai) / (1.9L * ai)) * (z - static_cast<ld>(nodes[i - 2]));
    }
    ld p1 = 0.0L, p2 = 0.0L, pp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      p1 = 1.0L;
      p2 = 0.0L;
      for (std::size_t j = 0; j < n; ++j) {
        const ld p3 = p2;
        p2 = p1;
        const ld jj = static_cast<ld>(j);
        p1 = ((2.0L * jj + 1.0L - z) * p2 - jj * p3) / (jj + 1.0L);
      }
      pp = (nn * p1 - nn * p2) / z;
      const ld z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-16L * std::fabs(z)) break;
    }
    nodes[i] = static_cast<double>(z);
    // w = -1 / (pp * n * L_{n-1}) with the standard normalisation.
    weights[i] = static_cast<double>(-1.0L / (pp * nn * p2));
  }
}

InitialCurve::InitialCurve(const ModelParams& params)
    : params_(params), slope_(params.beta / gamma_fn(params.alpha + 1.0)) {}

double InitialCurve::operator()(double t) const {
  if (t <= 0.0) return params_.sigma0_sq;
  return params_.sigma0_sq + slope_ * std::pow(t, params_.alpha);
}

cplx F_fn(cplx u, cplx v, const ModelParams& p, const JumpLaw& law) {
  const double sqrt_c = std::sqrt(p.c);
  cplx value = 0.5 * (u * u - u) + (p.b + p.rho * sqrt_c * u) * v + 0.5 * p.c * v * v;
  if (law.kind() != JumpLaw::Kind::none) {
    // int [e^{(v - Lu)z} - u(e^{-Lz} - 1) - 1 - vz] nu(dz) = J(v - Lu) - u J(-L)
    value += law.compensated_mgf(v - p.lambda_j * u) - u * law.compensated_mgf(-p.lambda_j);
  }
  return value;
}

cplx F_dv(cplx u, cplx v, const ModelParams& p, const JumpLaw& law) {
  cplx value = p.b + p.rho * std::sqrt(p.c) * u + p.c * v;
  if (law.kind() != JumpLaw::Kind::none) value += law.compensated_mgf_prime(v - p.lambda_j * u);
  return value;
}

cplx G_du(cplx u, const ModelParams& p, const JumpLaw& law) {
  cplx value = p.b + p.c * u;
  if (law.kind() != JumpLaw::Kind::none) value += law.compensated_mgf_prime(u);
  return value;
}

cplx G_fn(cplx u, const ModelParams& p, const JumpLaw& law) {
  cplx value = p.b * u + 0.5 * p.c * u * u;
  if (law.kind() != JumpLaw::Kind::none) value += law.compensated_mgf(u);
  return value;
}

LeverageConstants leverage_constants(const ModelParams& p, const JumpLaw& law) {
  LeverageConstants k;
  k.c1 = -(0.5 + law.compensated_mgf(-p.lambda_j).real());
  k.c2 = 1.0 + p.lambda_j * p.lambda_j * law.second_moment();
  return k;
}

}  // namespace rhh
