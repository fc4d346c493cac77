#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tep/core.hpp"

namespace tep::models {

/// E(θ, s) = θ · s on a continuous state (p = n).
class LinearModel final : public EnergyModel {
 public:
  explicit LinearModel(std::size_t n) : n_(n) {}

  std::string name() const override { return "linear"; }
  std::size_t param_dim() const override { return n_; }
  std::size_t state_dim() const override { return n_; }
  StateKind state_kind() const override { return StateKind::Continuous; }

  double energy(const ParamVector& theta, std::span<const double> s) const override;
  void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;
  void grad_state_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;

 private:
  std::size_t n_;
};

/// E(θ, s) = ½‖s − θ‖²: a Gaussian centred at θ with covariance T·I.
class QuadraticModel final : public EnergyModel {
 public:
  explicit QuadraticModel(std::size_t n, std::vector<bool> clamp = {});

  std::string name() const override { return "quadratic"; }
  std::size_t param_dim() const override { return n_; }
  std::size_t state_dim() const override { return n_; }
  StateKind state_kind() const override { return StateKind::Continuous; }
  std::vector<bool> clamp_mask() const override { return clamp_; }

  double energy(const ParamVector& theta, std::span<const double> s) const override;
  void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;
  void grad_state_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;

 private:
  std::size_t n_;
  std::vector<bool> clamp_;
};

/// One unit with s ∈ {0, 1}, E = θ s, and ℓ(s) = s. The only bundled discrete
/// model that does not use ±1 spins.
class TwoStateModel final : public EnergyModel {
 public:
  std::string name() const override { return "two-state"; }
  std::size_t param_dim() const override { return 1; }
  std::size_t state_dim() const override { return 1; }
  StateKind state_kind() const override { return StateKind::Binary; }
  std::array<double, 2> binary_levels() const override { return {0.0, 1.0}; }

  double energy(const ParamVector& theta, std::span<const double> s) const override;
  void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;

  static Loss loss();
};

/// Ising spin glass E = −Σ_{i<j} J_ij s_i s_j − Σ_i h_i s_i on ±1 spins.
/// Parameter layout: "couplings" (pairs (i, j), i < j, row-major) then "fields".
class SpinGlassModel final : public EnergyModel {
 public:
  explicit SpinGlassModel(std::size_t n);

  std::string name() const override { return "spin-glass"; }
  std::size_t param_dim() const override { return pairs_ + n_; }
  std::size_t state_dim() const override { return n_; }
  StateKind state_kind() const override { return StateKind::Binary; }
  std::vector<Segment> param_layout() const override;

  double energy(const ParamVector& theta, std::span<const double> s) const override;
  void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;

  std::size_t pair_index(std::size_t i, std::size_t j) const;

  // i.i.d. N(0, scale²) couplings and fields.
  ParamVector random_params(std::uint64_t seed, double scale = 1.0) const;
  ParamVector zero_params() const;

  // ℓ(s) = (1 − target · s_unit) / 2: one when the unit disagrees with the target spin.
  static Loss output_loss(std::size_t unit, double target);

 private:
  std::size_t n_;
  std::size_t pairs_;
};

struct LayerSizes {
  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  std::size_t n_out = 0;
};

/// Continuous Hopfield-style layered network with tanh units. State s = (x, h, o)
/// with x clamped;
///   E = ½‖h‖² + ½‖o‖² − tanh(h)ᵀW1ᵀx − tanh(o)ᵀW2ᵀtanh(h) − b_hᵀtanh(h) − b_oᵀtanh(o).
/// W1 is n_in × n_hidden, W2 is n_hidden × n_out, both row-major.
class LayeredTanhEnergyNet final : public EnergyModel {
 public:
  explicit LayeredTanhEnergyNet(LayerSizes sizes);

  std::string name() const override { return "layered-tanh"; }
  std::size_t param_dim() const override;
  std::size_t state_dim() const override { return sizes_.n_in + sizes_.n_hidden + sizes_.n_out; }
  StateKind state_kind() const override { return StateKind::Continuous; }
  std::vector<Segment> param_layout() const override;
  std::vector<bool> clamp_mask() const override;

  double energy(const ParamVector& theta, std::span<const double> s) const override;
  void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;
  void grad_state_energy(const ParamVector& theta, std::span<const double> s,
                         std::span<double> out) const override;
  void accumulate_grad_theta(const ParamVector& theta, std::span<const double> states,
                             std::span<const double> weights,
                             std::span<double> out) const override;
  std::unique_ptr<BoundEnergy> bind(const ParamVector& theta,
                                    std::span<const double> reference_state) const override;

  const LayerSizes& sizes() const { return sizes_; }
  std::size_t hidden_offset() const { return sizes_.n_in; }
  std::size_t output_offset() const { return sizes_.n_in + sizes_.n_hidden; }

  // Glorot-uniform weights, zero biases.
  ParamVector init_params(std::uint64_t seed) const;

  // State with the input clamped to x and zero hidden/output units.
  std::vector<double> make_state(std::span<const double> x) const;

  // ℓ(s) = ½‖o − target‖².
  Loss loss_for_example(std::span<const double> target) const;

 private:
  LayerSizes sizes_;
};

/// Feedforward network sharing the energy net's parameter layout:
/// o = W2ᵀ tanh(W1ᵀx + b_h) + b_o.
class FeedforwardBaseline {
 public:
  explicit FeedforwardBaseline(LayerSizes sizes) : sizes_(sizes) {}

  const LayerSizes& sizes() const { return sizes_; }
  std::vector<double> forward(const ParamVector& theta, std::span<const double> x) const;
  // ½‖forward(x) − target‖².
  double loss(const ParamVector& theta, std::span<const double> x,
              std::span<const double> target) const;
  ParamVector backprop_grad(const ParamVector& theta, std::span<const double> x,
                            std::span<const double> target) const;
  std::size_t predict(const ParamVector& theta, std::span<const double> x) const;

 private:
  void check(const ParamVector& theta, std::span<const double> x) const;

  LayerSizes sizes_;
};

std::vector<double> one_hot(std::size_t label, std::size_t n_classes);

}  // namespace tep::models
