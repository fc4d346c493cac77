#include "tep/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "tep/rng.hpp"

namespace tep::sampler {

namespace {

std::string divergence_message(std::size_t step, double step_size) {
  std::ostringstream os;
  os << "sampler diverged: non-finite state at step " << step << " (step size " << step_size << ")";
  return os.str();
}

struct ChainResult {
  std::vector<double> samples;
  std::vector<double> trace;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
};

// F(θ, β, ·) and its state gradient with the clamped inputs baked in.
class Objective {
 public:
  Objective(const System& sys, const ParamVector& theta, double beta, std::span<const double> ref)
      : sys_(sys), bound_(sys.energy().bind(theta, ref)), beta_(beta), scratch_(ref.size()) {}

  double value(std::span<const double> s) const {
    const double e = bound_->energy(s);
    return beta_ == 0.0 ? e : e + beta_ * sys_.loss(s);
  }

  void gradient(std::span<const double> s, std::span<double> out) {
    bound_->grad_state(s, out);
    if (beta_ == 0.0) return;
    sys_.loss.grad_state(s, scratch_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += beta_ * scratch_[i];
  }

 private:
  const System& sys_;
  std::unique_ptr<BoundEnergy> bound_;
  double beta_;
  std::vector<double> scratch_;
};

ChainResult run_langevin_chain(const System& sys, const ParamVector& theta, double beta, double t,
                               const ChainConfig& cfg, double eta, std::vector<double> s,
                               const std::vector<std::size_t>& free_units, std::uint64_t seed) {
  const bool adjusted = cfg.kernel == Kernel::LangevinMetropolisAdjusted;
  const std::size_t n = s.size();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Objective f(sys, theta, beta, s);

  const double drift = eta / t;
  const double noise = std::sqrt(2.0 * eta);
  std::vector<double> grad(n, 0.0), prop(s), grad_prop(n, 0.0);
  double fs = f.value(s);
  f.gradient(s, grad);

  ChainResult out;
  out.samples.reserve(cfg.kept_per_chain() * n);
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    for (std::size_t i : free_units) prop[i] = s[i] - drift * grad[i] + noise * normal(rng);
    if (adjusted) {
      const double fp = f.value(prop);
      if (!std::isfinite(fp)) throw DivergenceError(step, eta);
      f.gradient(prop, grad_prop);
      // log q(s | prop) − log q(prop | s) for the Gaussian Langevin proposal.
      double fwd = 0.0, rev = 0.0;
      for (std::size_t i : free_units) {
        const double a = prop[i] - s[i] + drift * grad[i];
        const double b = s[i] - prop[i] + drift * grad_prop[i];
        fwd += a * a;
        rev += b * b;
      }
      const double log_alpha = -(fp - fs) / t + (fwd - rev) / (4.0 * eta);
      ++out.proposed;
      if (log_alpha >= 0.0 || unif(rng) < std::exp(log_alpha)) {
        ++out.accepted;
        for (std::size_t i : free_units) {
          s[i] = prop[i];
          grad[i] = grad_prop[i];
        }
        fs = fp;
      }
    } else {
      for (std::size_t i : free_units) s[i] = prop[i];
      fs = f.value(s);
      if (!std::isfinite(fs)) throw DivergenceError(step, eta);
      f.gradient(s, grad);
    }
    for (std::size_t i : free_units) {
      if (!std::isfinite(s[i])) throw DivergenceError(step, eta);
    }
    if (step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
      out.samples.insert(out.samples.end(), s.begin(), s.end());
      out.trace.push_back(fs);
    }
  }
  return out;
}

ChainResult run_gibbs_chain(const System& sys, const ParamVector& theta, double beta, double t,
                            const ChainConfig& cfg, std::vector<double> s,
                            const std::vector<std::size_t>& free_units, bool random_init,
                            std::uint64_t seed) {
  const auto levels = sys.energy().binary_levels();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (random_init) {
    for (std::size_t i : free_units) s[i] = levels[unif(rng) < 0.5 ? 0 : 1];
  }
  Objective f(sys, theta, beta, s);

  ChainResult out;
  out.samples.reserve(cfg.kept_per_chain() * s.size());
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    for (std::size_t i : free_units) {
      s[i] = levels[0];
      const double f_lo = f.value(s);
      s[i] = levels[1];
      const double f_hi = f.value(s);
      // P(s_i = hi | rest) = 1 / (1 + exp((F_hi − F_lo) / T))
      const double p_hi = 1.0 / (1.0 + std::exp((f_hi - f_lo) / t));
      s[i] = unif(rng) < p_hi ? levels[1] : levels[0];
    }
    if (step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
      out.samples.insert(out.samples.end(), s.begin(), s.end());
      out.trace.push_back(f.value(s));
    }
  }
  return out;
}

}  // namespace

DivergenceError::DivergenceError(std::size_t step, double step_size)
    : SamplerError(divergence_message(step, step_size)), step_(step), step_size_(step_size) {}

const char* kernel_name(Kernel k) {
  switch (k) {
    case Kernel::LangevinUnadjusted: return "ula";
    case Kernel::LangevinMetropolisAdjusted: return "mala";
    case Kernel::GibbsSweepBinary: return "gibbs";
  }
  return "?";
}

Kernel parse_kernel(const std::string& name) {
  if (name == "ula") return Kernel::LangevinUnadjusted;
  if (name == "mala") return Kernel::LangevinMetropolisAdjusted;
  if (name == "gibbs") return Kernel::GibbsSweepBinary;
  throw InputError("unknown sampler kernel '" + name + "' (expected ula, mala or gibbs)");
}

ChainConfig ChainConfig::with_steps(std::size_t n_steps, Kernel kernel, std::uint64_t seed) {
  ChainConfig cfg;
  cfg.n_steps = n_steps;
  cfg.burn_in = n_steps / 5;
  cfg.kernel = kernel;
  cfg.seed = seed;
  return cfg;
}

void ChainConfig::validate() const {
  if (n_chains == 0) throw InputError("chain config: n_chains must be positive");
  if (n_steps == 0) throw InputError("chain config: n_steps must be positive");
  if (burn_in >= n_steps) throw InputError("chain config: burn_in must be below n_steps");
  if (thin == 0) throw InputError("chain config: thin must be at least 1");
  if (step_size < 0.0 || !std::isfinite(step_size)) {
    throw InputError("chain config: step size must be positive");
  }
}

double default_step_size(double temperature, std::size_t free_units) {
  const double d = static_cast<double>(std::max<std::size_t>(free_units, 1));
  return 0.8 * temperature * std::pow(d, -1.0 / 3.0);
}

std::vector<double> SampleBatch::mean_state() const {
  std::vector<double> m(state_dim, 0.0);
  const std::size_t count = size();
  for (std::size_t r = 0; r < count; ++r) {
    const auto s = sample(r);
    for (std::size_t i = 0; i < state_dim; ++i) m[i] += s[i];
  }
  for (double& v : m) v /= static_cast<double>(count);
  return m;
}

SampleBatch run_chains(const System& sys, const ParamVector& theta, double beta, Temperature temp,
                       const ChainConfig& cfg, const std::optional<StateVector>& init, Exec exec) {
  cfg.validate();
  const NudgeStrength nudge(beta);
  const EnergyModel& model = sys.energy();
  model.validate_params(theta);
  const bool langevin = cfg.kernel != Kernel::GibbsSweepBinary;
  if (langevin && model.state_kind() != StateKind::Continuous) {
    throw SamplerError(std::string("kernel ") + kernel_name(cfg.kernel) +
                       " needs a continuous model, got " + model.name());
  }
  if (!langevin && model.state_kind() != StateKind::Binary) {
    throw SamplerError("kernel gibbs needs a binary model, got " + model.name());
  }
  if (langevin && nudge.value() != 0.0 && !sys.loss.has_gradient()) {
    throw SamplerError("Langevin sampling of a nudged phase needs a loss with a state gradient");
  }

  const std::size_t n = model.state_dim();
  std::vector<double> start(n, model.state_kind() == StateKind::Binary ? model.binary_levels()[0] : 0.0);
  if (init) {
    model.validate_state(init->values());
    start.assign(init->values().begin(), init->values().end());
  }
  const auto mask = model.clamp_mask();
  std::vector<std::size_t> free_units;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) free_units.push_back(i);
  }
  const double t = temp.value();
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : default_step_size(t, free_units.size());

  std::vector<ChainResult> chains(cfg.n_chains);
  detail::for_each_index(cfg.n_chains, exec, [&](std::size_t c) {
    const std::uint64_t seed = derive_seed(cfg.seed, {c});
    chains[c] = langevin ? run_langevin_chain(sys, theta, nudge.value(), t, cfg, eta, start, free_units, seed)
                         : run_gibbs_chain(sys, theta, nudge.value(), t, cfg, start, free_units,
                                           !init.has_value(), seed);
  });

  SampleBatch batch;
  batch.state_dim = n;
  batch.beta = nudge.value();
  batch.temperature = t;
  batch.theta_hash = theta.hash();
  batch.chain_offsets.push_back(0);
  std::size_t accepted = 0, proposed = 0;
  for (const auto& chain : chains) {
    batch.data.insert(batch.data.end(), chain.samples.begin(), chain.samples.end());
    batch.chain_offsets.push_back(batch.data.size() / n);
    batch.ess.push_back(effective_sample_size(chain.trace));
    accepted += chain.accepted;
    proposed += chain.proposed;
  }
  if (cfg.kernel == Kernel::LangevinMetropolisAdjusted) {
    const double rate = proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    batch.acceptance_rate = rate;
    if (rate <= 0.4 || rate >= 0.9) {
      std::ostringstream os;
      os << "MALA acceptance rate " << rate << " outside (0.4, 0.9) at step size " << eta;
      batch.warnings.push_back(os.str());
    }
  }
  return batch;
}

RelaxResult relax_deterministic(const System& sys, const ParamVector& theta, double beta,
                                const StateVector& init, double step_size, std::size_t max_iters,
                                double tol) {
  const EnergyModel& model = sys.energy();
  if (model.state_kind() != StateKind::Continuous) {
    throw SamplerError("relaxation needs a continuous model, got " + model.name());
  }
  if (!(step_size > 0.0)) throw InputError("relaxation: step size must be positive");
  model.validate_state(init.values());
  const NudgeStrength nudge(beta);
  if (nudge.value() != 0.0 && !sys.loss.has_gradient()) {
    throw SamplerError("relaxation of a nudged phase needs a loss with a state gradient");
  }
  const auto mask = model.clamp_mask();
  std::vector<double> s(init.values().begin(), init.values().end());
  Objective f(sys, theta, nudge.value(), s);
  std::vector<double> grad(s.size());

  RelaxResult result;
  for (std::size_t it = 0;; ++it) {
    f.gradient(s, grad);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!mask[i]) worst = std::max(worst, std::abs(grad[i]));
    }
    if (!std::isfinite(worst)) throw DivergenceError(it, step_size);
    result.iterations = it;
    if (worst <= tol) {
      result.converged = true;
      break;
    }
    if (it == max_iters) break;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!mask[i]) s[i] -= step_size * grad[i];
    }
  }
  result.state = StateVector::continuous(std::move(s));
  return result;
}

double effective_sample_size(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : trace) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (trace[i] - mean) * (trace[i + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  // Geyer: sum consecutive-pair autocorrelations while the pair sums stay positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n / 2; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

}  // namespace tep::sampler
