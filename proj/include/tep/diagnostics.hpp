#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tep/core.hpp"
#include "tep/sampler.hpp"

namespace tep::diagnostics {

struct Cosine {
  double value = 0.0;
  bool degenerate = false;  // one side was the zero vector; value is then 0
  bool operator==(const Cosine&) const = default;
};

/// u·v / (‖u‖‖v‖). Throws InputError on a dimension mismatch.
Cosine cosine(std::span<const double> u, std::span<const double> v);
Cosine cosine(const ParamVector& u, const ParamVector& v);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// A system plus the state its chains start from (the same init for both phases).
struct Probe {
  System sys;
  std::optional<StateVector> init;
};

enum class SnrMode {
  RunNorm,  // ‖mean_r Δs_r‖ / mean_r ‖Δs_r − mean Δs‖
  PerUnit,  // average over free units of |mean Δs_i| / mean_r |Δs_ri − mean Δs_i|
};

const char* snr_mode_name(SnrMode m);
SnrMode parse_snr_mode(const std::string& name);

struct SnrConfig {
  std::size_t repeats = 8;
  sampler::ChainConfig chain;
  SnrMode mode = SnrMode::RunNorm;
  // Noise off: each phase is the deterministic relaxation of its kernel.
  bool deterministic = false;
  double relax_step = 0.5;
  std::size_t relax_iters = 2000;
  double relax_tol = 1e-9;
};

/// Signal-to-noise ratio of Δs = s_β − s_0 over R paired runs, with Δs
/// concatenated across probes. Returns +∞ when the residual vanishes and the
/// signal does not.
double snr_of_perturbation(std::span<const Probe> probes, const ParamVector& theta, double beta,
                           Temperature temp, const SnrConfig& cfg, Exec exec = Exec::Parallel);

/// Typical SNR of pure noise for R repeats in RunNorm mode, about 1/√R.
double snr_noise_floor(std::size_t repeats);

struct SweepConfig {
  std::vector<double> grid{1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0};
  sampler::ChainConfig chain;      // budget of ĝ(β), matched across the grid
  sampler::ChainConfig reference;  // high budget for Monte Carlo references
  SnrConfig snr;                   // snr.chain is overwritten by chain
  std::uint64_t seed = 1;
  void validate() const;
};

struct SweepRow {
  double beta = 0.0;
  Cosine vs_supervised;
  Cosine vs_reference;  // against ∇_θ[A(θ, β) − A(θ, 0)]
  double snr = 0.0;
  std::size_t samples_per_phase = 0;  // summed over probes
  std::uint64_t seed = 0;
  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<double> grid;
  std::vector<SweepRow> rows;
  bool reference_exact = false;  // references came from enumeration
};

/// Compares ĝ(β) averaged over probes with the supervised gradient and with
/// ∇J_β. Enumerable probes use exact references; others use Monte Carlo at
/// the reference budget.
SweepResult alignment_sweep(std::span<const Probe> probes, const ParamVector& theta,
                            Temperature temp, const SweepConfig& cfg, Exec exec = Exec::Parallel);

/// Long format: beta,metric,value,degenerate,samples_per_phase,seed.
/// Metrics are cos_supervised, cos_reference and snr.
void write_sweep_csv(const SweepResult& result, std::ostream& out);

}  // namespace tep::diagnostics
