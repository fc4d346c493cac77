#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tep/core.hpp"
#include "tep/quadrature.hpp"
#include "tep/sampler.hpp"

namespace tep::estimators {

enum class Method { ExpectationContrast, IntegratedCovariance, ClassicalEP, PathIntegral, SupervisedCovariance };

const char* method_name(Method m);

class EstimationError : public Error {
 public:
  using Error::Error;
};

struct GradEstimate {
  ParamVector grad;
  std::vector<double> std_err;
  Method method = Method::ExpectationContrast;
  struct Meta {
    std::vector<double> betas;               // one entry per sampled phase / node
    std::vector<std::size_t> sample_counts;  // matching betas
    std::vector<std::uint64_t> seeds;        // matching betas
    std::vector<double> mean_losses;         // sample mean of ℓ per phase
  } meta;
};

/// First and second moments of one phase, ρ_β, as consumed by the estimators.
struct PhaseMoments {
  double beta = 0.0;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double mean_loss = 0.0;
  std::vector<double> mean_grad;     // 𝔼[∇_θE]
  std::vector<double> mean_grad_se;
  std::vector<double> cov;           // Cov[ℓ, ∇_θE] (n−1 normalization); empty unless requested
  std::vector<double> cov_se;
};

/// Supplies phase moments either by Monte Carlo or by exact enumeration.
class ExpectationSource {
 public:
  virtual ~ExpectationSource() = default;
  // phase identifies the random stream; different phases are independent.
  virtual PhaseMoments moments(double beta, std::uint64_t phase, bool with_covariance) = 0;
};

class MonteCarloSource final : public ExpectationSource {
 public:
  MonteCarloSource(const System& sys, const ParamVector& theta, Temperature temp,
                   sampler::ChainConfig cfg, std::optional<StateVector> init = std::nullopt,
                   Exec exec = Exec::Parallel);
  PhaseMoments moments(double beta, std::uint64_t phase, bool with_covariance) override;

 private:
  const System& sys_;
  const ParamVector& theta_;
  Temperature temp_;
  sampler::ChainConfig cfg_;
  std::optional<StateVector> init_;
  Exec exec_;
};

class ExactSource final : public ExpectationSource {
 public:
  ExactSource(const System& sys, const ParamVector& theta, Temperature temp)
      : sys_(sys), theta_(theta), temp_(temp) {}
  PhaseMoments moments(double beta, std::uint64_t phase, bool with_covariance) override;

 private:
  const System& sys_;
  const ParamVector& theta_;
  Temperature temp_;
};

/// Moments of an existing batch. Standard errors come from the spread of
/// per-chain estimates, or of 8 contiguous blocks when there is one chain.
PhaseMoments batch_moments(const System& sys, const ParamVector& theta,
                           const sampler::SampleBatch& batch, bool with_covariance);

// Estimator formulas over any source.
GradEstimate contrast(ExpectationSource& src, const ParamVector& theta);
GradEstimate covariance(ExpectationSource& src, const ParamVector& theta, Temperature temp,
                        const QuadratureSpec& quad, Method tag = Method::IntegratedCovariance);
GradEstimate classical_ep(ExpectationSource& src, const ParamVector& theta, double beta_small);
GradEstimate supervised(ExpectationSource& src, const ParamVector& theta, Temperature temp);

// Monte Carlo entry points.
GradEstimate grad_contrast_mc(const System& sys, const ParamVector& theta, Temperature temp,
                              const sampler::ChainConfig& cfg,
                              const std::optional<StateVector>& init = std::nullopt,
                              Exec exec = Exec::Parallel);
GradEstimate grad_covariance_mc(const System& sys, const ParamVector& theta, Temperature temp,
                                const QuadratureSpec& quad, const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init = std::nullopt,
                                Exec exec = Exec::Parallel);
/// (1/β_small)(𝔼_{ρ_β_small}[∇_θE] − 𝔼_{ρ_0}[∇_θE]); the practical contrastive update ĝ(β).
GradEstimate grad_classical_ep(const System& sys, const ParamVector& theta, Temperature temp,
                               double beta_small, const sampler::ChainConfig& cfg,
                               const std::optional<StateVector>& init = std::nullopt,
                               Exec exec = Exec::Parallel);
/// Quadrature over covariance nodes; same estimator as grad_covariance_mc, reported separately.
GradEstimate grad_path_integral(const System& sys, const ParamVector& theta, Temperature temp,
                                const QuadratureSpec& quad, const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init = std::nullopt,
                                Exec exec = Exec::Parallel);
/// −(1/T) Cov_{ρ_0}[ℓ, ∇_θE] ≈ ∇_θ 𝔼_{ρ_0}[ℓ].
GradEstimate grad_supervised_mc(const System& sys, const ParamVector& theta, Temperature temp,
                                const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init = std::nullopt,
                                Exec exec = Exec::Parallel);

/// Coordinate-wise mean of estimates (minibatch averaging); std_err combines in quadrature.
GradEstimate average(const std::vector<GradEstimate>& parts);

}  // namespace tep::estimators
