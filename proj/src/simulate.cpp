#include "rhh/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rhh/errors.hpp"
#include "rhh/numerics.hpp"
#include "rhh/parallel.hpp"

namespace rhh {

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  std::uint32_t k0 = key_[0], k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += kW0;
    k1 += kW1;
  }
  return ctr;
}

double SampleSet::spot(std::size_t i) const { return S0 * std::exp(log_return[i]); }

namespace {

// Uniform draws for one (path, step): blocks of four indexed by `block`.
class StepStream {
 public:
  StepStream(const Philox4x32& gen, std::uint64_t path, std::uint32_t step)
      : gen_(gen), path_(path), step_(step) {}

  double uniform() {
    if (used_ == 4) refill();
    return Philox4x32::to_unit(buffer_[used_++]);
  }

 private:
  void refill() {
    buffer_ = gen_({static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32),
                    step_, block_++});
    used_ = 0;
  }
  const Philox4x32& gen_;
  std::uint64_t path_;
  std::uint32_t step_;
  std::uint32_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

double normal(StepStream& rng) {
  return std::sqrt(-2.0 * std::log(rng.uniform())) * std::cos(2.0 * kPi * rng.uniform());
}

unsigned poisson(StepStream& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean > 500.0) {
    const double v = std::round(mean + std::sqrt(mean) * normal(rng));
    return v < 0.0 ? 0u : static_cast<unsigned>(v);
  }
  const double v = rng.uniform();
  double prob = std::exp(-mean), cdf = prob;
  unsigned k = 0;
  while (v > cdf && k < 100000) {
    ++k;
    prob *= mean / k;
    cdf += prob;
    if (prob < 1e-300 && static_cast<double>(k) > mean) break;
  }
  return k;
}

// Gamma(shape, 1), Marsaglia-Tsang with the U^(1/shape) boost below 1.
double gamma_variate(StepStream& rng, double shape) {
  if (shape < 1.0) return gamma_variate(rng, shape + 1.0) * std::pow(rng.uniform(), 1.0 / shape);
  if (shape == std::floor(shape) && shape <= 12.0) {
    double prod = 1.0;
    for (int i = 0; i < static_cast<int>(shape); ++i) prod *= rng.uniform();
    return -std::log(prod);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

// Exact transition of dV = (theta + a V) dt + s sqrt(V) dW over dt, theta >= 0:
// scaled noncentral chi-square, drawn as a Poisson mixture of gamma laws.
double cir_step(StepStream& rng, double v0, double theta, double a, double s, double dt) {
  const double grow = std::expm1(a * dt);
  const double scale = std::abs(a * dt) < 1e-12 ? 0.25 * s * s * dt : 0.25 * s * s * grow / a;
  const double half_dof = 2.0 * theta / (s * s);
  const double half_noncentral = v0 > 0.0 ? 0.5 * v0 * (1.0 + grow) / scale : 0.0;
  if (half_noncentral + half_dof > 1e8) {
    // Noncentral chi-square this concentrated is Gaussian to ~1e-4 in skew.
    const double mean = 2.0 * scale * (half_dof + half_noncentral);
    const double sd = 2.0 * scale * std::sqrt(half_dof + 2.0 * half_noncentral);
    return std::max(mean + sd * normal(rng), 0.0);
  }
  const double shape = half_dof + poisson(rng, half_noncentral);
  return shape > 0.0 ? 2.0 * scale * gamma_variate(rng, shape) : 0.0;
}

}  // namespace

SampleSet simulate_terminal(const ModelParams& params, const JumpLaw& law,
                            const MultiFactorKernel& kn, const HForcing& forcing, double T,
                            const SimConfig& cfg) {
  params.validate();
  if (cfg.n_paths == 0) throw ValidationError("simulation needs at least one path");
  if (!(T > 0.0)) throw ValidationError("simulation horizon must be positive");
  if (!(cfg.S0 > 0.0)) throw ValidationError("S0 must be positive");
  const double step_req = cfg.step > 0.0 ? cfg.step : T / 1000.0;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(T / step_req - 1e-9)));
  const double dt = T / static_cast<double>(steps);
  const double sqrt_dt = std::sqrt(dt);

  const InitialCurve curve(params);
  const std::size_t n = kn.size();
  std::vector<double> decay(n), weight(n);
  for (std::size_t j = 0; j < n; ++j) {
    decay[j] = std::exp(-kn.rates[j] * dt);
    weight[j] = phi1(kn.rates[j] * dt);
  }
  std::vector<double> half_decay(n);
  double k0 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    half_decay[j] = std::exp(-0.5 * kn.rates[j] * dt);
    k0 += kn.weights[j];
  }
  std::vector<double> g0(steps), g0_mid(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    g0[s] = curve(dt * static_cast<double>(s));
    g0_mid[s] = curve(dt * (static_cast<double>(s) + 0.5));
  }

  // VIX_T^2 = A + sum_j m_j H_j U_j(T).
  const double vix_base = forcing.trapezoid([&](double u) { return curve(T + u); });
  std::vector<double> vix_loading(n);
  for (std::size_t j = 0; j < n; ++j) vix_loading[j] = kn.weights[j] * forcing.exp_moment(kn.rates[j]);

  const double c1 = leverage_constants(params, law).c1;
  const double sqrt_c = std::sqrt(params.c);
  const double rho_bar = std::sqrt(std::max(0.0, 1.0 - params.rho * params.rho));
  const double mass = law.mass();
  const double m1 = law.first_moment();
  const bool jumps = law.kind() != JumpLaw::Kind::none && mass > 0.0;
  const double noise_rate = k0 * (params.b - m1);
  const double noise_growth = std::exp(noise_rate * dt);
  const double mid_discount = std::exp(-0.5 * noise_rate * dt);
  const Philox4x32 gen(cfg.seed);

  SampleSet out;
  out.T = T;
  out.S0 = cfg.S0;
  out.antithetic = cfg.antithetic;
  out.log_return.resize(cfg.n_paths);
  out.vix2.resize(cfg.n_paths);
  out.integrated_variance.resize(cfg.n_paths);
  out.realized_qv.resize(cfg.n_paths);
  out.jump_counts.resize(cfg.n_paths);

  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (cfg.n_paths + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t chunk) {
    std::vector<double> u(n);
    const std::size_t end = std::min(cfg.n_paths, (chunk + 1) * kChunk);
    for (std::size_t p = chunk * kChunk; p < end; ++p) {
      const std::uint64_t stream = cfg.antithetic ? p / 2 : p;
      const double sign = (cfg.antithetic && p % 2 == 1) ? -1.0 : 1.0;
      std::fill(u.begin(), u.end(), 0.0);
      double x = 0.0, iv = 0.0, qv = 0.0;
      std::uint32_t count = 0;
      for (std::size_t s = 0; s < steps; ++s) {
        StepStream rng(gen, stream, static_cast<std::uint32_t>(s));
        double dz, dx, integrated;
        double jump_sum = 0.0, jump_sq = 0.0;
        auto draw_jumps = [&](double intensity) {
          if (!jumps || intensity <= 0.0) return;
          const unsigned k = poisson(rng, mass * intensity);
          for (unsigned i = 0; i < k; ++i) {
            const double z = law.quantile(rng.uniform());
            jump_sum += z;
            jump_sq += z * z;
          }
          count += k;
        };
        if (cfg.scheme == SimScheme::positive_split) {
          // Strang splitting: half-step factor decay, exact CIR for the
          // noise with V = g0(mid) + sum m_j U_j, half-step decay.
          double start = g0_mid[s];
          for (std::size_t j = 0; j < n; ++j) {
            u[j] *= half_decay[j];
            start += kn.weights[j] * u[j];
          }
          start = std::max(start, 0.0);
          const double end_v = cir_step(rng, start, 0.0, noise_rate, k0 * sqrt_c, dt);
          const double dz_c = (end_v - start) / k0;
          integrated = 0.5 * (start + end_v) * dt;
          // int sqrt(V) dW2 from the martingale part of the transition,
          // discounted to the step midpoint.
          const double stoch2 = mid_discount * (end_v - noise_growth * start) / (k0 * sqrt_c);
          const double w1 = sign * normal(rng);
          draw_jumps(integrated);
          const double compensated = jump_sum - m1 * integrated;
          dz = dz_c + jump_sum;
          dx = c1 * integrated + params.rho * stoch2 + rho_bar * std::sqrt(integrated) * w1 -
               params.lambda_j * compensated;
        } else {
          double var = g0[s];
          for (std::size_t j = 0; j < n; ++j) var += kn.weights[j] * u[j];
          const double vp = std::max(var, 0.0);
          const double vol = std::sqrt(vp);
          const double r = std::sqrt(-2.0 * std::log(rng.uniform()));
          const double theta = 2.0 * kPi * rng.uniform();
          const double dw1 = sign * r * std::cos(theta) * sqrt_dt;
          const double dw2 = sign * r * std::sin(theta) * sqrt_dt;
          integrated = vp * dt;
          draw_jumps(integrated);
          const double compensated = jump_sum - m1 * integrated;
          dz = params.b * integrated + sqrt_c * vol * dw2 + compensated;
          dx = c1 * integrated + vol * (rho_bar * dw1 + params.rho * dw2) -
               params.lambda_j * compensated;
        }
        x += dx;
        iv += integrated;
        qv += integrated + params.lambda_j * params.lambda_j * jump_sq;
        if (cfg.scheme == SimScheme::positive_split) {
          for (std::size_t j = 0; j < n; ++j) u[j] = half_decay[j] * (u[j] + dz);
        } else {
          for (std::size_t j = 0; j < n; ++j) u[j] = decay[j] * u[j] + weight[j] * dz;
        }
      }
      double vix2 = vix_base;
      for (std::size_t j = 0; j < n; ++j) vix2 += vix_loading[j] * u[j];
      out.log_return[p] = x;
      out.vix2[p] = vix2;
      out.integrated_variance[p] = iv;
      out.realized_qv[p] = qv;
      out.jump_counts[p] = count;
    }
  });
  return out;
}

SampleSet simulate_terminal(const ModelParams& params, const JumpLaw& law,
                            const MultiFactorKernel& kn, double T, const SimConfig& cfg) {
  return simulate_terminal(params, law, kn, make_h_forcing(params, law, kn), T, cfg);
}

McEstimate mc_mean(const SampleSet& samples, const std::function<double(std::size_t)>& f) {
  const std::size_t n = samples.size();
  if (n == 0) throw ValidationError("empty sample set");
  const bool paired = samples.antithetic && n >= 2;
  const std::size_t groups = paired ? n / 2 : n;
  if (groups < 2) {
    McEstimate e;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f(i);
    e.value = s / static_cast<double>(n);
    return e;
  }
  // Welford over group means.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double v = paired ? 0.5 * (f(2 * g) + f(2 * g + 1)) : f(g);
    const double d = v - mean;
    mean += d / static_cast<double>(g + 1);
    m2 += d * (v - mean);
  }
  McEstimate e;
  e.value = mean;
  e.std_error = std::sqrt(m2 / static_cast<double>(groups - 1) / static_cast<double>(groups));
  return e;
}

McEstimate mc_price(McInstrument instrument, double k, const SampleSet& samples) {
  const double strike = std::exp(k);
  auto vix = [&](std::size_t i) { return std::sqrt(std::max(samples.vix2[i], 0.0)); };
  switch (instrument) {
    case McInstrument::spx_call:
      return mc_mean(samples, [&](std::size_t i) { return std::max(samples.spot(i) - strike, 0.0); });
    case McInstrument::spx_put:
      return mc_mean(samples, [&](std::size_t i) { return std::max(strike - samples.spot(i), 0.0); });
    case McInstrument::vix_put:
      return mc_mean(samples, [&](std::size_t i) { return std::max(strike - vix(i), 0.0); });
    case McInstrument::vix_call:
      return mc_mean(samples, [&](std::size_t i) { return std::max(vix(i) - strike, 0.0); });
    case McInstrument::vix_future:
      return mc_mean(samples, vix);
  }
  throw ValidationError("unknown instrument");
}

void write_samples(std::ostream& os, const SampleSet& samples) {
  os << "x_T,s_T,vix2,integrated_variance,realized_qv,jumps\n";
  os.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i)
    os << samples.log_return[i] << ',' << samples.spot(i) << ',' << samples.vix2[i] << ','
       << samples.integrated_variance[i] << ',' << samples.realized_qv[i] << ','
       << samples.jump_counts[i] << '\n';
}

}  // namespace rhh
