#include "tep/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tep/rng.hpp"

namespace tep::models {

namespace {

void require_dims(const EnergyModel& m, const ParamVector& theta, std::span<const double> s) {
  if (theta.size() != m.param_dim() || s.size() != m.state_dim()) {
    throw InputError(m.name() + ": shape mismatch (theta " + std::to_string(theta.size()) +
                     ", state " + std::to_string(s.size()) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearModel

double LinearModel::energy(const ParamVector& theta, std::span<const double> s) const {
  require_dims(*this, theta, s);
  return dot(theta.values(), s);
}

void LinearModel::grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                    std::span<double> out) const {
  require_dims(*this, theta, s);
  std::copy(s.begin(), s.end(), out.begin());
}

void LinearModel::grad_state_energy(const ParamVector& theta, std::span<const double> s,
                                    std::span<double> out) const {
  require_dims(*this, theta, s);
  std::copy(theta.values().begin(), theta.values().end(), out.begin());
}

// ---------------------------------------------------------------------------
// QuadraticModel

QuadraticModel::QuadraticModel(std::size_t n, std::vector<bool> clamp)
    : n_(n), clamp_(clamp.empty() ? std::vector<bool>(n, false) : std::move(clamp)) {
  if (clamp_.size() != n_) throw InputError("quadratic: clamp mask size mismatch");
}

double QuadraticModel::energy(const ParamVector& theta, std::span<const double> s) const {
  require_dims(*this, theta, s);
  double e = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double d = s[i] - theta[i];
    e += 0.5 * d * d;
  }
  return e;
}

void QuadraticModel::grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                       std::span<double> out) const {
  require_dims(*this, theta, s);
  for (std::size_t i = 0; i < n_; ++i) out[i] = theta[i] - s[i];
}

void QuadraticModel::grad_state_energy(const ParamVector& theta, std::span<const double> s,
                                       std::span<double> out) const {
  require_dims(*this, theta, s);
  for (std::size_t i = 0; i < n_; ++i) out[i] = s[i] - theta[i];
}

// ---------------------------------------------------------------------------
// TwoStateModel

double TwoStateModel::energy(const ParamVector& theta, std::span<const double> s) const {
  require_dims(*this, theta, s);
  return theta[0] * s[0];
}

void TwoStateModel::grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                      std::span<double> out) const {
  require_dims(*this, theta, s);
  out[0] = s[0];
}

Loss TwoStateModel::loss() {
  return Loss([](std::span<const double> s) { return s[0]; });
}

// ---------------------------------------------------------------------------
// SpinGlassModel

SpinGlassModel::SpinGlassModel(std::size_t n) : n_(n), pairs_(n * (n - 1) / 2) {
  if (n == 0) throw InputError("spin-glass: need at least one spin");
}

std::vector<Segment> SpinGlassModel::param_layout() const {
  return {Segment{"couplings", 0, pairs_}, Segment{"fields", pairs_, n_}};
}

std::size_t SpinGlassModel::pair_index(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (i == j || j >= n_) throw InputError("pair_index: need two distinct units below n");
  // Row i holds pairs (i, i+1) .. (i, n-1).
  return i * n_ - i * (i + 1) / 2 + (j - i - 1);
}

double SpinGlassModel::energy(const ParamVector& theta, std::span<const double> s) const {
  require_dims(*this, theta, s);
  const auto v = theta.values();
  double e = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) e -= v[k++] * s[i] * s[j];
  }
  for (std::size_t i = 0; i < n_; ++i) e -= v[pairs_ + i] * s[i];
  return e;
}

void SpinGlassModel::grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                       std::span<double> out) const {
  require_dims(*this, theta, s);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) out[k++] = -s[i] * s[j];
  }
  for (std::size_t i = 0; i < n_; ++i) out[pairs_ + i] = -s[i];
}

ParamVector SpinGlassModel::random_params(std::uint64_t seed, double scale) const {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(param_dim());
  for (double& x : v) x = normal(rng);
  return ParamVector(std::move(v), param_layout());
}

ParamVector SpinGlassModel::zero_params() const {
  return ParamVector(std::vector<double>(param_dim(), 0.0), param_layout());
}

Loss SpinGlassModel::output_loss(std::size_t unit, double target) {
  return Loss([unit, target](std::span<const double> s) { return 0.5 * (1.0 - target * s[unit]); });
}

// ---------------------------------------------------------------------------
// LayeredTanhEnergyNet

namespace {

struct NetView {
  std::span<const double> w1, w2, bh, bo;
};

NetView view(const LayerSizes& z, const ParamVector& theta) {
  const auto v = theta.values();
  const std::size_t a = z.n_in * z.n_hidden;
  const std::size_t b = z.n_hidden * z.n_out;
  return {v.subspan(0, a), v.subspan(a, b), v.subspan(a + b, z.n_hidden),
          v.subspan(a + b + z.n_hidden, z.n_out)};
}

// drive[j] = Σ_i W1[i][j] x_i + b_h[j]
void input_drive(const LayerSizes& z, const NetView& nv, std::span<const double> x,
                 std::span<double> drive) {
  std::copy(nv.bh.begin(), nv.bh.end(), drive.begin());
  for (std::size_t i = 0; i < z.n_in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = nv.w1.data() + i * z.n_hidden;
    for (std::size_t j = 0; j < z.n_hidden; ++j) drive[j] += row[j] * xi;
  }
}

// Energy given the cached input drive (b_h folded in).
double energy_from_drive(const LayerSizes& z, const NetView& nv, std::span<const double> drive,
                         std::span<const double> h, std::span<const double> o) {
  double e = 0.0;
  thread_local std::vector<double> th;
  th.resize(z.n_hidden);
  for (std::size_t j = 0; j < z.n_hidden; ++j) {
    th[j] = std::tanh(h[j]);
    e += 0.5 * h[j] * h[j] - th[j] * drive[j];
  }
  for (std::size_t k = 0; k < z.n_out; ++k) {
    const double to = std::tanh(o[k]);
    double a = nv.bo[k];
    for (std::size_t j = 0; j < z.n_hidden; ++j) a += nv.w2[j * z.n_out + k] * th[j];
    e += 0.5 * o[k] * o[k] - to * a;
  }
  return e;
}

// Gradient in (h, o) given the cached drive; writes into gh and go.
void grad_from_drive(const LayerSizes& z, const NetView& nv, std::span<const double> drive,
                     std::span<const double> h, std::span<const double> o, std::span<double> gh,
                     std::span<double> go) {
  thread_local std::vector<double> th, to;
  th.resize(z.n_hidden);
  to.resize(z.n_out);
  for (std::size_t j = 0; j < z.n_hidden; ++j) th[j] = std::tanh(h[j]);
  for (std::size_t k = 0; k < z.n_out; ++k) to[k] = std::tanh(o[k]);
  for (std::size_t j = 0; j < z.n_hidden; ++j) {
    double a = drive[j];
    const double* row = nv.w2.data() + j * z.n_out;
    for (std::size_t k = 0; k < z.n_out; ++k) a += row[k] * to[k];
    gh[j] = h[j] - (1.0 - th[j] * th[j]) * a;
  }
  for (std::size_t k = 0; k < z.n_out; ++k) {
    double a = nv.bo[k];
    for (std::size_t j = 0; j < z.n_hidden; ++j) a += nv.w2[j * z.n_out + k] * th[j];
    go[k] = o[k] - (1.0 - to[k] * to[k]) * a;
  }
}

class BoundLayeredNet final : public BoundEnergy {
 public:
  BoundLayeredNet(const LayerSizes& z, const ParamVector& theta, std::span<const double> x)
      : z_(z), nv_(view(z, theta)), drive_(z.n_hidden) {
    input_drive(z_, nv_, x, drive_);
  }

  double energy(std::span<const double> s) const override {
    return energy_from_drive(z_, nv_, drive_, s.subspan(z_.n_in, z_.n_hidden),
                             s.subspan(z_.n_in + z_.n_hidden, z_.n_out));
  }

  // Clamped input coordinates receive a zero gradient.
  void grad_state(std::span<const double> s, std::span<double> out) const override {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(z_.n_in), 0.0);
    grad_from_drive(z_, nv_, drive_, s.subspan(z_.n_in, z_.n_hidden),
                    s.subspan(z_.n_in + z_.n_hidden, z_.n_out), out.subspan(z_.n_in, z_.n_hidden),
                    out.subspan(z_.n_in + z_.n_hidden, z_.n_out));
  }

 private:
  LayerSizes z_;
  NetView nv_;
  std::vector<double> drive_;
};

}  // namespace

LayeredTanhEnergyNet::LayeredTanhEnergyNet(LayerSizes sizes) : sizes_(sizes) {
  if (sizes.n_in == 0 || sizes.n_hidden == 0 || sizes.n_out == 0) {
    throw InputError("layered-tanh: all layer sizes must be positive");
  }
}

std::size_t LayeredTanhEnergyNet::param_dim() const {
  const auto& z = sizes_;
  return z.n_in * z.n_hidden + z.n_hidden * z.n_out + z.n_hidden + z.n_out;
}

std::vector<Segment> LayeredTanhEnergyNet::param_layout() const {
  const auto& z = sizes_;
  const std::size_t a = z.n_in * z.n_hidden;
  const std::size_t b = z.n_hidden * z.n_out;
  return {Segment{"W1", 0, a}, Segment{"W2", a, b}, Segment{"b_h", a + b, z.n_hidden},
          Segment{"b_o", a + b + z.n_hidden, z.n_out}};
}

std::vector<bool> LayeredTanhEnergyNet::clamp_mask() const {
  std::vector<bool> mask(state_dim(), false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(sizes_.n_in), true);
  return mask;
}

double LayeredTanhEnergyNet::energy(const ParamVector& theta, std::span<const double> s) const {
  require_dims(*this, theta, s);
  const auto nv = view(sizes_, theta);
  std::vector<double> drive(sizes_.n_hidden);
  input_drive(sizes_, nv, s.subspan(0, sizes_.n_in), drive);
  return energy_from_drive(sizes_, nv, drive, s.subspan(hidden_offset(), sizes_.n_hidden),
                           s.subspan(output_offset(), sizes_.n_out));
}

void LayeredTanhEnergyNet::grad_theta_energy(const ParamVector& theta, std::span<const double> s,
                                             std::span<double> out) const {
  require_dims(*this, theta, s);
  std::fill(out.begin(), out.end(), 0.0);
  const double w = 1.0;
  accumulate_grad_theta(theta, s, std::span<const double>(&w, 1), out);
}

void LayeredTanhEnergyNet::grad_state_energy(const ParamVector& theta, std::span<const double> s,
                                             std::span<double> out) const {
  require_dims(*this, theta, s);
  const auto& z = sizes_;
  const auto nv = view(z, theta);
  const auto x = s.subspan(0, z.n_in);
  const auto h = s.subspan(hidden_offset(), z.n_hidden);
  std::vector<double> drive(z.n_hidden);
  input_drive(z, nv, x, drive);
  grad_from_drive(z, nv, drive, h, s.subspan(output_offset(), z.n_out),
                  out.subspan(hidden_offset(), z.n_hidden), out.subspan(output_offset(), z.n_out));
  // ∂E/∂x_i = −Σ_j W1[i][j] tanh(h_j)
  std::vector<double> th(z.n_hidden);
  for (std::size_t j = 0; j < z.n_hidden; ++j) th[j] = std::tanh(h[j]);
  for (std::size_t i = 0; i < z.n_in; ++i) {
    const double* row = nv.w1.data() + i * z.n_hidden;
    double a = 0.0;
    for (std::size_t j = 0; j < z.n_hidden; ++j) a += row[j] * th[j];
    out[i] = -a;
  }
}

void LayeredTanhEnergyNet::accumulate_grad_theta(const ParamVector& theta,
                                                 std::span<const double> states,
                                                 std::span<const double> weights,
                                                 std::span<double> out) const {
  const auto& z = sizes_;
  const std::size_t n = state_dim();
  if (theta.size() != param_dim() || out.size() != param_dim() ||
      states.size() != weights.size() * n) {
    throw InputError("layered-tanh: shape mismatch in accumulate_grad_theta");
  }
  const std::size_t a = z.n_in * z.n_hidden;
  const std::size_t b = z.n_hidden * z.n_out;
  auto g_w1 = out.subspan(0, a);
  auto g_w2 = out.subspan(a, b);
  auto g_bh = out.subspan(a + b, z.n_hidden);
  auto g_bo = out.subspan(a + b + z.n_hidden, z.n_out);

  // Clamped inputs are usually shared by every sample in a batch; then the W1
  // block factorizes as x ⊗ Σ_i w_i tanh(h_i).
  bool shared_input = true;
  for (std::size_t r = 1; r < weights.size() && shared_input; ++r) {
    shared_input = std::equal(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(z.n_in),
                              states.begin() + static_cast<std::ptrdiff_t>(r * n));
  }

  std::vector<double> sum_th(z.n_hidden, 0.0), th(z.n_hidden), to(z.n_out);
  for (std::size_t r = 0; r < weights.size(); ++r) {
    const double w = weights[r];
    if (w == 0.0) continue;
    const auto s = states.subspan(r * n, n);
    for (std::size_t j = 0; j < z.n_hidden; ++j) th[j] = std::tanh(s[z.n_in + j]);
    for (std::size_t k = 0; k < z.n_out; ++k) to[k] = std::tanh(s[z.n_in + z.n_hidden + k]);
    for (std::size_t j = 0; j < z.n_hidden; ++j) {
      const double wt = w * th[j];
      sum_th[j] += wt;
      double* row = g_w2.data() + j * z.n_out;
      for (std::size_t k = 0; k < z.n_out; ++k) row[k] -= wt * to[k];
    }
    for (std::size_t k = 0; k < z.n_out; ++k) g_bo[k] -= w * to[k];
    if (!shared_input) {
      for (std::size_t i = 0; i < z.n_in; ++i) {
        const double xi = s[i];
        if (xi == 0.0) continue;
        double* row = g_w1.data() + i * z.n_hidden;
        for (std::size_t j = 0; j < z.n_hidden; ++j) row[j] -= w * xi * th[j];
      }
    }
  }
  for (std::size_t j = 0; j < z.n_hidden; ++j) g_bh[j] -= sum_th[j];
  if (shared_input && !weights.empty()) {
    for (std::size_t i = 0; i < z.n_in; ++i) {
      const double xi = states[i];
      if (xi == 0.0) continue;
      double* row = g_w1.data() + i * z.n_hidden;
      for (std::size_t j = 0; j < z.n_hidden; ++j) row[j] -= xi * sum_th[j];
    }
  }
}

std::unique_ptr<BoundEnergy> LayeredTanhEnergyNet::bind(
    const ParamVector& theta, std::span<const double> reference_state) const {
  require_dims(*this, theta, reference_state);
  return std::make_unique<BoundLayeredNet>(sizes_, theta, reference_state.subspan(0, sizes_.n_in));
}

ParamVector LayeredTanhEnergyNet::init_params(std::uint64_t seed) const {
  const auto& z = sizes_;
  Rng rng(seed);
  std::vector<double> v(param_dim(), 0.0);
  const double r1 = std::sqrt(6.0 / static_cast<double>(z.n_in + z.n_hidden));
  const double r2 = std::sqrt(6.0 / static_cast<double>(z.n_hidden + z.n_out));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  const std::size_t a = z.n_in * z.n_hidden;
  const std::size_t b = z.n_hidden * z.n_out;
  for (std::size_t i = 0; i < a; ++i) v[i] = u1(rng);
  for (std::size_t i = a; i < a + b; ++i) v[i] = u2(rng);
  return ParamVector(std::move(v), param_layout());
}

std::vector<double> LayeredTanhEnergyNet::make_state(std::span<const double> x) const {
  if (x.size() != sizes_.n_in) throw InputError("layered-tanh: input dimension mismatch");
  std::vector<double> s(state_dim(), 0.0);
  std::copy(x.begin(), x.end(), s.begin());
  return s;
}

Loss LayeredTanhEnergyNet::loss_for_example(std::span<const double> target) const {
  if (target.size() != sizes_.n_out) {
    throw InputError("layered-tanh: target has dimension " + std::to_string(target.size()) +
                     ", expected " + std::to_string(sizes_.n_out));
  }
  std::vector<double> y(target.begin(), target.end());
  const std::size_t off = output_offset();
  return Loss(
      [y, off](std::span<const double> s) {
        double l = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
          const double d = s[off + k] - y[k];
          l += 0.5 * d * d;
        }
        return l;
      },
      [y, off](std::span<const double> s, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t k = 0; k < y.size(); ++k) out[off + k] = s[off + k] - y[k];
      });
}

// ---------------------------------------------------------------------------
// FeedforwardBaseline

void FeedforwardBaseline::check(const ParamVector& theta, std::span<const double> x) const {
  const auto& z = sizes_;
  const std::size_t p = z.n_in * z.n_hidden + z.n_hidden * z.n_out + z.n_hidden + z.n_out;
  if (theta.size() != p || x.size() != z.n_in) throw InputError("feedforward: shape mismatch");
}

std::vector<double> FeedforwardBaseline::forward(const ParamVector& theta,
                                                 std::span<const double> x) const {
  check(theta, x);
  const auto& z = sizes_;
  const auto nv = view(z, theta);
  std::vector<double> hidden(z.n_hidden);
  input_drive(z, nv, x, hidden);
  for (double& v : hidden) v = std::tanh(v);
  std::vector<double> o(nv.bo.begin(), nv.bo.end());
  for (std::size_t j = 0; j < z.n_hidden; ++j) {
    const double* row = nv.w2.data() + j * z.n_out;
    for (std::size_t k = 0; k < z.n_out; ++k) o[k] += row[k] * hidden[j];
  }
  return o;
}

double FeedforwardBaseline::loss(const ParamVector& theta, std::span<const double> x,
                                 std::span<const double> target) const {
  const auto o = forward(theta, x);
  if (target.size() != o.size()) throw InputError("feedforward: target dimension mismatch");
  double l = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) l += 0.5 * (o[k] - target[k]) * (o[k] - target[k]);
  return l;
}

ParamVector FeedforwardBaseline::backprop_grad(const ParamVector& theta, std::span<const double> x,
                                               std::span<const double> target) const {
  check(theta, x);
  const auto& z = sizes_;
  if (target.size() != z.n_out) throw InputError("feedforward: target dimension mismatch");
  const auto nv = view(z, theta);
  std::vector<double> hidden(z.n_hidden);
  input_drive(z, nv, x, hidden);
  for (double& v : hidden) v = std::tanh(v);
  std::vector<double> delta_o(nv.bo.begin(), nv.bo.end());
  for (std::size_t j = 0; j < z.n_hidden; ++j) {
    const double* row = nv.w2.data() + j * z.n_out;
    for (std::size_t k = 0; k < z.n_out; ++k) delta_o[k] += row[k] * hidden[j];
  }
  for (std::size_t k = 0; k < z.n_out; ++k) delta_o[k] -= target[k];

  std::vector<double> g(theta.size(), 0.0);
  const std::size_t a = z.n_in * z.n_hidden;
  const std::size_t b = z.n_hidden * z.n_out;
  std::vector<double> delta_h(z.n_hidden);
  for (std::size_t j = 0; j < z.n_hidden; ++j) {
    const double* row = nv.w2.data() + j * z.n_out;
    double back = 0.0;
    for (std::size_t k = 0; k < z.n_out; ++k) {
      g[a + j * z.n_out + k] = hidden[j] * delta_o[k];
      back += row[k] * delta_o[k];
    }
    delta_h[j] = back * (1.0 - hidden[j] * hidden[j]);
    g[a + b + j] = delta_h[j];
  }
  for (std::size_t k = 0; k < z.n_out; ++k) g[a + b + z.n_hidden + k] = delta_o[k];
  for (std::size_t i = 0; i < z.n_in; ++i) {
    if (x[i] == 0.0) continue;
    for (std::size_t j = 0; j < z.n_hidden; ++j) g[i * z.n_hidden + j] = x[i] * delta_h[j];
  }
  return theta.with_values(std::move(g));
}

std::size_t FeedforwardBaseline::predict(const ParamVector& theta, std::span<const double> x) const {
  const auto o = forward(theta, x);
  return static_cast<std::size_t>(std::max_element(o.begin(), o.end()) - o.begin());
}

std::vector<double> one_hot(std::size_t label, std::size_t n_classes) {
  if (label >= n_classes) throw InputError("one_hot: label out of range");
  std::vector<double> v(n_classes, 0.0);
  v[label] = 1.0;
  return v;
}

}  // namespace tep::models
