#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tep/core.hpp"

namespace tep::sampler {

class SamplerError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public SamplerError {
 public:
  DivergenceError(std::size_t step, double step_size);
  std::size_t step() const { return step_; }
  double step_size() const { return step_size_; }

 private:
  std::size_t step_;
  double step_size_;
};

enum class Kernel { LangevinUnadjusted, LangevinMetropolisAdjusted, GibbsSweepBinary };

const char* kernel_name(Kernel k);
Kernel parse_kernel(const std::string& name);

struct ChainConfig {
  std::size_t n_chains = 8;
  std::size_t n_steps = 1000;
  std::size_t burn_in = 200;
  std::size_t thin = 1;
  double step_size = 0.0;  // 0 selects default_step_size()
  std::uint64_t seed = 0;
  Kernel kernel = Kernel::LangevinMetropolisAdjusted;

  // n_steps steps with the default 20% burn-in.
  static ChainConfig with_steps(std::size_t n_steps, Kernel kernel, std::uint64_t seed);

  std::size_t kept_per_chain() const { return (n_steps - burn_in + thin - 1) / thin; }
  void validate() const;
};

/// Heuristic Langevin step for a model at temperature T with d free units.
double default_step_size(double temperature, std::size_t free_units);

struct SampleBatch {
  std::size_t state_dim = 0;
  std::vector<double> data;                // row-major, size() × state_dim, chain-major
  std::vector<std::size_t> chain_offsets;  // first sample index of each chain, plus end
  double beta = 0.0;
  double temperature = 1.0;
  std::uint64_t theta_hash = 0;
  std::optional<double> acceptance_rate;  // Metropolis-adjusted kernels only
  std::vector<double> ess;                // per chain, from the kernel-objective trace
  std::vector<std::string> warnings;

  std::size_t size() const { return state_dim == 0 ? 0 : data.size() / state_dim; }
  std::size_t n_chains() const { return chain_offsets.empty() ? 0 : chain_offsets.size() - 1; }
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(data).subspan(i * state_dim, state_dim);
  }
  std::span<const double> chain_data(std::size_t c) const {
    return std::span<const double>(data).subspan(chain_offsets[c] * state_dim,
                                                 (chain_offsets[c + 1] - chain_offsets[c]) * state_dim);
  }
  std::size_t chain_size(std::size_t c) const { return chain_offsets[c + 1] - chain_offsets[c]; }
  std::vector<double> mean_state() const;

  bool operator==(const SampleBatch&) const = default;
};

/// Draws from ρ_β(s; θ) ∝ exp(−F(θ, β, s)/T). Chain c uses the stream
/// derive_seed(cfg.seed, {c}), so serial and parallel runs agree bit for bit.
SampleBatch run_chains(const System& sys, const ParamVector& theta, double beta, Temperature temp,
                       const ChainConfig& cfg, const std::optional<StateVector>& init = std::nullopt,
                       Exec exec = Exec::Parallel);

struct RelaxResult {
  StateVector state;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Gradient descent on F(θ, β, ·) over the unclamped units until ‖∇_s F‖_∞ ≤ tol.
RelaxResult relax_deterministic(const System& sys, const ParamVector& theta, double beta,
                                const StateVector& init, double step_size, std::size_t max_iters,
                                double tol);

/// Initial-positive-sequence ESS of a scalar trace.
double effective_sample_size(std::span<const double> trace);

}  // namespace tep::sampler
