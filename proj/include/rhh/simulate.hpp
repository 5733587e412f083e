#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "rhh/kernel.hpp"
#include "rhh/model.hpp"
#include "rhh/riccati.hpp"

namespace rhh {

/// Philox4x32-10 counter-based generator: four 32-bit outputs per
/// (key, counter). Streams are addressed, not advanced, so any path can be
/// regenerated independently.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter operator()(Counter ctr) const;
  /// Maps a 32-bit output to (0, 1).
  static double to_unit(std::uint32_t v) { return (static_cast<double>(v) + 0.5) * 0x1p-32; }

 private:
  std::array<std::uint32_t, 2> key_;
};

enum class SimScheme {
  /// Strang splitting: half-step factor decay, then the noise step
  /// dV = K_n(0) ((b - m1) V dt + sqrt(c V) dW) sampled exactly as a
  /// zero-dimensional CIR transition, then half-step decay. The Z increment
  /// is read back from the variance change. Keeps V >= 0.
  positive_split,
  /// Euler with the variance floored at 0 inside the coefficients.
  full_truncation_euler,
};

struct SimConfig {
  std::size_t n_paths = 100000;
  double step = 0.0;  // <= 0 selects T / 1000
  std::uint64_t seed = 42;
  bool antithetic = false;
  double S0 = 1.0;
  SimScheme scheme = SimScheme::positive_split;
};

/// Per-path terminal quantities of the lifted model.
struct SampleSet {
  double T = 0.0;
  double S0 = 1.0;
  bool antithetic = false;
  std::vector<double> log_return;           // X_T
  std::vector<double> vix2;                 // VIX_T^2 from the affine relation (index points^2)
  std::vector<double> integrated_variance;  // int_0^T sigma_+^2 dt
  std::vector<double> realized_qv;          // int sigma_+^2 dt + sum Lambda^2 z^2
  std::vector<std::uint32_t> jump_counts;

  std::size_t size() const { return log_return.size(); }
  double spot(std::size_t i) const;  // S_T = S0 e^{X_T}
};

/// Simulates the n-factor lift with the scheme in cfg (antithetic partners
/// under positive_split share the variance path and mirror the orthogonal
/// Brownian motion). Jumps arrive per step
/// as Poisson with intensity nu(R+) sigma_+^2 and hit Z with +z and X with
/// -Lambda z, both compensated. VIX_T^2 is read off the factor states.
SampleSet simulate_terminal(const ModelParams& params, const JumpLaw& law,
                            const MultiFactorKernel& kn, const HForcing& forcing, double T,
                            const SimConfig& cfg);
SampleSet simulate_terminal(const ModelParams& params, const JumpLaw& law,
                            const MultiFactorKernel& kn, double T, const SimConfig& cfg);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of f(i) over the sample; antithetic pairs are
/// averaged before the variance is taken.
McEstimate mc_mean(const SampleSet& samples, const std::function<double(std::size_t)>& f);

enum class McInstrument { spx_call, spx_put, vix_put, vix_call, vix_future };

/// k is the log-strike (SPX: ln K; VIX: ln K in index points). Ignored for
/// the VIX future.
McEstimate mc_price(McInstrument instrument, double k, const SampleSet& samples);

/// CSV dump: x_T,s_T,vix2,integrated_variance,realized_qv,jumps.
void write_samples(std::ostream& os, const SampleSet& samples);

}  // namespace rhh
