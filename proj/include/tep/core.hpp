#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tep {

// Error hierarchy. Everything thrown by the library derives from tep::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kRelErrFloor = 1e-12;

enum class Exec { Serial, Parallel };

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Learnable parameters: a flat finite vector partitioned into named segments.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim);
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::vector<double> values, std::vector<Segment> layout);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment(const std::string& name) const;
  std::span<const double> segment_values(const std::string& name) const;

  // Copy with replaced values and the same layout (validated).
  ParamVector with_values(std::vector<double> values) const;

  // FNV-1a over the raw bytes; identifies θ in sample metadata.
  std::uint64_t hash() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> layout_;
};

enum class StateKind { Continuous, Binary };

class StateVector {
 public:
  StateVector() = default;
  StateVector(std::vector<double> values, StateKind kind);

  static StateVector continuous(std::vector<double> values) {
    return StateVector(std::move(values), StateKind::Continuous);
  }
  static StateVector spins(std::vector<double> values) {
    return StateVector(std::move(values), StateKind::Binary);
  }

  std::size_t size() const { return values_.size(); }
  StateKind kind() const { return kind_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const StateVector&) const = default;

 private:
  std::vector<double> values_;
  StateKind kind_ = StateKind::Continuous;
};

class Temperature {
 public:
  explicit Temperature(double value = 1.0);
  double value() const { return value_; }

 private:
  double value_;
};

class NudgeStrength {
 public:
  explicit NudgeStrength(double value = 0.0);
  double value() const { return value_; }

 private:
  double value_;
};

/// Energy with the state of the clamped units fixed, for the inner loops of
/// samplers and relaxation. Implementations may cache input-dependent terms.
class BoundEnergy {
 public:
  virtual ~BoundEnergy() = default;
  virtual double energy(std::span<const double> s) const = 0;
  virtual void grad_state(std::span<const double> s, std::span<double> out) const = 0;
};

/// A parametric energy E(θ, s). Implementations are read-only under evaluation.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual StateKind state_kind() const = 0;
  virtual std::vector<Segment> param_layout() const;

  virtual double energy(const ParamVector& theta, std::span<const double> s) const = 0;
  virtual void grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                 std::span<double> out) const = 0;
  // Continuous models only; the default throws ModelError.
  virtual void grad_state_energy(const ParamVector& theta, std::span<const double> s,
                                 std::span<double> out) const;

  virtual std::vector<bool> clamp_mask() const;

  // The two values a Binary unit may take. ±1 spins unless a model says otherwise.
  virtual std::array<double, 2> binary_levels() const { return {-1.0, 1.0}; }

  // out += Σ_i weights[i] · ∇_θE(θ, states[i]); states is row-major (count × n).
  virtual void accumulate_grad_theta(const ParamVector& theta, std::span<const double> states,
                                     std::span<const double> weights,
                                     std::span<double> out) const;

  // The returned object may reference theta; it must not outlive it.
  virtual std::unique_ptr<BoundEnergy> bind(const ParamVector& theta,
                                            std::span<const double> reference_state) const;

  // Throws InputError when s does not fit this model.
  void validate_state(std::span<const double> s) const;
  void validate_params(const ParamVector& theta) const;
};

/// A task loss ℓ(s). It never sees θ.
class Loss {
 public:
  using Value = std::function<double(std::span<const double>)>;
  using Gradient = std::function<void(std::span<const double>, std::span<double>)>;

  Loss() : Loss(zero()) {}
  explicit Loss(Value value, Gradient gradient = {});

  static Loss zero();
  static Loss constant(double c);

  double operator()(std::span<const double> s) const { return value_(s); }
  bool has_gradient() const { return static_cast<bool>(gradient_); }
  // out = ∇_s ℓ(s); throws ModelError when no gradient was supplied.
  void grad_state(std::span<const double> s, std::span<double> out) const;

 private:
  Value value_;
  Gradient gradient_;
};

/// An energy model paired with the loss that nudges it.
struct System {
  std::shared_ptr<const EnergyModel> model;
  Loss loss;

  const EnergyModel& energy() const { return *model; }
};

/// F(θ, β, s) = E(θ, s) + β ℓ(s).
double objective_kernel(const System& sys, const ParamVector& theta, NudgeStrength beta,
                        std::span<const double> s);

/// Gradient of F in s (continuous models).
void grad_state_kernel(const System& sys, const ParamVector& theta, double beta,
                       std::span<const double> s, std::span<double> out);

/// ‖analytic − central difference‖∞ / (‖central difference‖∞ + 1e-12).
double check_grad_theta(const EnergyModel& model, const ParamVector& theta,
                        std::span<const double> s, double h);

/// Same check for ∂E/∂s restricted to unclamped coordinates.
double check_grad_state(const EnergyModel& model, const ParamVector& theta,
                        std::span<const double> s, double h);

// Small vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
bool all_finite(std::span<const double> a);

}  // namespace tep
