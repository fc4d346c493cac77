#include "tep/core.hpp"

#include "tep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace tep {

namespace {

void check_layout(std::size_t dim, const std::vector<Segment>& layout) {
  std::size_t cursor = 0;
  for (const auto& seg : layout) {
    if (seg.offset != cursor) {
      throw InputError("parameter layout: segment '" + seg.name + "' starts at " +
                       std::to_string(seg.offset) + ", expected " + std::to_string(cursor));
    }
    cursor += seg.length;
  }
  if (cursor != dim) {
    throw InputError("parameter layout covers " + std::to_string(cursor) + " of " +
                     std::to_string(dim) + " entries");
  }
}

// Evaluates E through the model on a full state, ignoring clamping.
class DefaultBoundEnergy final : public BoundEnergy {
 public:
  DefaultBoundEnergy(const EnergyModel& model, const ParamVector& theta)
      : model_(model), theta_(theta) {}

  double energy(std::span<const double> s) const override { return model_.energy(theta_, s); }
  void grad_state(std::span<const double> s, std::span<double> out) const override {
    model_.grad_state_energy(theta_, s, out);
  }

 private:
  const EnergyModel& model_;
  const ParamVector& theta_;
};

}  // namespace

ParamVector::ParamVector(std::size_t dim) : ParamVector(std::vector<double>(dim, 0.0)) {}

ParamVector::ParamVector(std::vector<double> values)
    : ParamVector(values, {Segment{"theta", 0, values.size()}}) {}

ParamVector::ParamVector(std::vector<double> values, std::vector<Segment> layout)
    : values_(std::move(values)), layout_(std::move(layout)) {
  if (!all_finite(values_)) throw InputError("ParamVector: non-finite entry");
  check_layout(values_.size(), layout_);
}

const Segment& ParamVector::segment(const std::string& name) const {
  for (const auto& seg : layout_) {
    if (seg.name == name) return seg;
  }
  throw InputError("ParamVector: no segment named '" + name + "'");
}

std::span<const double> ParamVector::segment_values(const std::string& name) const {
  const auto& seg = segment(name);
  return std::span<const double>(values_).subspan(seg.offset, seg.length);
}

ParamVector ParamVector::with_values(std::vector<double> values) const {
  return ParamVector(std::move(values), layout_);
}

std::uint64_t ParamVector::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ values_.size();
  for (double v : values_) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof v);
    h = splitmix64(h ^ bits);
  }
  return h;
}

StateVector::StateVector(std::vector<double> values, StateKind kind)
    : values_(std::move(values)), kind_(kind) {
  if (!all_finite(values_)) throw InputError("StateVector: non-finite entry");
}

Temperature::Temperature(double value) : value_(value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError("temperature must be positive and finite");
  }
}

NudgeStrength::NudgeStrength(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw InputError("nudging strength must lie in [0, 1]");
}

std::vector<Segment> EnergyModel::param_layout() const {
  return {Segment{"theta", 0, param_dim()}};
}

void EnergyModel::grad_state_energy(const ParamVector&, std::span<const double>,
                                    std::span<double>) const {
  throw ModelError(name() + ": no state gradient (discrete state space)");
}

std::vector<bool> EnergyModel::clamp_mask() const {
  return std::vector<bool>(state_dim(), false);
}

void EnergyModel::accumulate_grad_theta(const ParamVector& theta, std::span<const double> states,
                                        std::span<const double> weights,
                                        std::span<double> out) const {
  const std::size_t n = state_dim();
  std::vector<double> g(param_dim());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    grad_theta_energy(theta, states.subspan(i * n, n), g);
    for (std::size_t k = 0; k < g.size(); ++k) out[k] += weights[i] * g[k];
  }
}

std::unique_ptr<BoundEnergy> EnergyModel::bind(const ParamVector& theta,
                                               std::span<const double>) const {
  return std::make_unique<DefaultBoundEnergy>(*this, theta);
}

void EnergyModel::validate_state(std::span<const double> s) const {
  if (s.size() != state_dim()) {
    throw InputError(name() + ": state has dimension " + std::to_string(s.size()) +
                     ", expected " + std::to_string(state_dim()));
  }
  if (state_kind() == StateKind::Binary) {
    const auto levels = binary_levels();
    for (double v : s) {
      if (v != levels[0] && v != levels[1]) {
        throw InputError(name() + ": binary state holds value " + std::to_string(v));
      }
    }
  } else if (!all_finite(s)) {
    throw InputError(name() + ": non-finite state entry");
  }
}

void EnergyModel::validate_params(const ParamVector& theta) const {
  if (theta.size() != param_dim()) {
    throw InputError(name() + ": parameter vector has dimension " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(param_dim()));
  }
}

Loss::Loss(Value value, Gradient gradient)
    : value_(std::move(value)), gradient_(std::move(gradient)) {
  if (!value_) throw InputError("Loss: empty value function");
}

Loss Loss::zero() { return constant(0.0); }

Loss Loss::constant(double c) {
  return Loss([c](std::span<const double>) { return c; },
              [](std::span<const double>, std::span<double> out) {
                std::fill(out.begin(), out.end(), 0.0);
              });
}

void Loss::grad_state(std::span<const double> s, std::span<double> out) const {
  if (!gradient_) throw ModelError("loss has no state gradient");
  gradient_(s, out);
}

double objective_kernel(const System& sys, const ParamVector& theta, NudgeStrength beta,
                        std::span<const double> s) {
  sys.energy().validate_state(s);
  const double e = sys.energy().energy(theta, s);
  if (!std::isfinite(e)) throw EvaluationError("objective kernel: energy term is not finite");
  const double l = sys.loss(s);
  if (!std::isfinite(l)) throw EvaluationError("objective kernel: loss term is not finite");
  return e + beta.value() * l;
}

void grad_state_kernel(const System& sys, const ParamVector& theta, double beta,
                       std::span<const double> s, std::span<double> out) {
  sys.energy().grad_state_energy(theta, s, out);
  if (beta == 0.0) return;
  std::vector<double> gl(s.size());
  sys.loss.grad_state(s, gl);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] += beta * gl[i];
}

double check_grad_theta(const EnergyModel& model, const ParamVector& theta,
                        std::span<const double> s, double h) {
  if (!(h > 0.0)) throw InputError("check_grad_theta: step must be positive");
  std::vector<double> analytic(model.param_dim());
  model.grad_theta_energy(theta, s, analytic);
  std::vector<double> work(theta.values().begin(), theta.values().end());
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < work.size(); ++k) {
    const double saved = work[k];
    work[k] = saved + h;
    const double up = model.energy(theta.with_values(work), s);
    work[k] = saved - h;
    const double down = model.energy(theta.with_values(work), s);
    work[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[k] - fd));
    scale = std::max(scale, std::abs(fd));
  }
  return worst / (scale + kRelErrFloor);
}

double check_grad_state(const EnergyModel& model, const ParamVector& theta,
                        std::span<const double> s, double h) {
  if (!(h > 0.0)) throw InputError("check_grad_state: step must be positive");
  std::vector<double> analytic(model.state_dim());
  model.grad_state_energy(theta, s, analytic);
  const auto mask = model.clamp_mask();
  std::vector<double> work(s.begin(), s.end());
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (mask[i]) continue;
    const double saved = work[i];
    work[i] = saved + h;
    const double up = model.energy(theta, work);
    work[i] = saved - h;
    const double down = model.energy(theta, work);
    work[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd));
    scale = std::max(scale, std::abs(fd));
  }
  return worst / (scale + kRelErrFloor);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace tep
