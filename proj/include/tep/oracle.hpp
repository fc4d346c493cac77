#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tep/core.hpp"
#include "tep/quadrature.hpp"

namespace tep::oracle {

// Exact ground truth by exhaustive enumeration of a Binary state space.

class EnumerationRefused : public Error {
 public:
  using Error::Error;
};

struct Limits {
  std::size_t n_max = 16;
};

/// ρ_β over every state. Unit j of state i takes the upper binary level iff bit j of i is set.
struct GibbsTable {
  std::size_t state_dim = 0;
  std::vector<double> states;       // row-major, size() × state_dim
  std::vector<double> log_weights;  // −F(θ, β, s_i) / T
  std::vector<double> probs;
  double log_z = 0.0;
  double beta = 0.0;
  double temperature = 1.0;

  std::size_t size() const { return probs.size(); }
  std::span<const double> state(std::size_t i) const {
    return std::span<const double>(states).subspan(i * state_dim, state_dim);
  }
  double log_prob(std::size_t i) const { return log_weights[i] - log_z; }
};

using StateFunction = std::function<double(std::span<const double>)>;
using VectorStateFunction = std::function<void(std::span<const double>, std::span<double>)>;

/// Parallel execution splits states into fixed blocks and combines block
/// partials in index order, so results do not depend on the thread count.
GibbsTable gibbs_table(const System& sys, const ParamVector& theta, NudgeStrength beta,
                       Temperature temp, Exec exec = Exec::Parallel, Limits limits = {});

double expectation(const GibbsTable& table, const StateFunction& f, Exec exec = Exec::Parallel);
std::vector<double> expectation(const GibbsTable& table, const VectorStateFunction& f,
                                std::size_t dim, Exec exec = Exec::Parallel);

// 𝔼_ρ[∇_θE] and Cov_ρ[ℓ, ∇_θE] over a table.
std::vector<double> expected_grad_theta(const GibbsTable& table, const System& sys,
                                        const ParamVector& theta, Exec exec = Exec::Parallel);
std::vector<double> loss_grad_covariance(const GibbsTable& table, const System& sys,
                                         const ParamVector& theta, Exec exec = Exec::Parallel);

/// log Z_β(θ).
double partition_function(const System& sys, const ParamVector& theta, NudgeStrength beta,
                          Temperature temp, Limits limits = {});

/// A(θ, β) = −T log Z_β(θ).
double free_energy(const System& sys, const ParamVector& theta, NudgeStrength beta,
                   Temperature temp, Limits limits = {});

/// A(θ, to) − A(θ, from) − offset, evaluated as a log-expectation under ρ_from.
/// An offset close to the difference itself keeps the result accurate to full
/// relative precision, which finite differences need.
double free_energy_difference(const System& sys, const ParamVector& theta, NudgeStrength from,
                              NudgeStrength to, Temperature temp, double offset = 0.0,
                              Limits limits = {});
/// J(θ) = A(θ, 1) − A(θ, 0).
double contrastive_objective(const System& sys, const ParamVector& theta, Temperature temp,
                             Limits limits = {});

double gibbs_expectation(const System& sys, const ParamVector& theta, NudgeStrength beta,
                         Temperature temp, const StateFunction& f, Limits limits = {});
std::vector<double> gibbs_expectation(const System& sys, const ParamVector& theta,
                                      NudgeStrength beta, Temperature temp,
                                      const VectorStateFunction& f, std::size_t dim,
                                      Limits limits = {});

/// 𝔼_{ρ_1}[∇_θE] − 𝔼_{ρ_0}[∇_θE].
ParamVector exact_grad_J_contrast(const System& sys, const ParamVector& theta, Temperature temp,
                                  Limits limits = {});

/// ∇_θ[A(θ, β) − A(θ, 0)] = 𝔼_{ρ_β}[∇_θE] − 𝔼_{ρ_0}[∇_θE].
ParamVector exact_grad_J_beta(const System& sys, const ParamVector& theta, NudgeStrength beta,
                              Temperature temp, Limits limits = {});

/// ∂A/∂β = 𝔼_{ρ_β}[ℓ].
double exact_dA_dbeta(const System& sys, const ParamVector& theta, NudgeStrength beta,
                      Temperature temp, Limits limits = {});

/// −(1/T) Σ_k w_k Cov_{ρ_{β_k}}[ℓ, ∇_θE] with exact per-node covariances.
ParamVector exact_grad_J_covariance(const System& sys, const ParamVector& theta,
                                    Temperature temp, const QuadratureSpec& quad,
                                    Limits limits = {});

/// ∇_θ 𝔼_{ρ_0}[ℓ] = −(1/T) Cov_{ρ_0}[ℓ, ∇_θE].
ParamVector exact_grad_supervised(const System& sys, const ParamVector& theta, Temperature temp,
                                  Limits limits = {});

/// KL(ρ_1 ∥ ρ_0), evaluated directly from the two probability tables.
double kl_nudged_free(const System& sys, const ParamVector& theta, Temperature temp,
                      Limits limits = {});

/// J − (𝔼_{ρ_1}[ℓ] + T · KL(ρ_1 ∥ ρ_0)).
double decomposition_residual(const System& sys, const ParamVector& theta, Temperature temp,
                              Limits limits = {});

/// 𝔼_q[E + βℓ] − T·S(q) for an explicit distribution q over the enumerated states.
double variational_free_energy(const System& sys, const ParamVector& theta, NudgeStrength beta,
                               Temperature temp, std::span<const double> q, Limits limits = {});

}  // namespace tep::oracle
