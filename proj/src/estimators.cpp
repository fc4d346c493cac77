#include "tep/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "tep/oracle.hpp"
#include "tep/rng.hpp"

namespace tep::estimators {

namespace {

constexpr std::size_t kSingleChainBlocks = 8;

// Sample standard deviation of per-group estimates divided by √G.
std::vector<double> group_std_err(const std::vector<std::vector<double>>& groups, std::size_t dim) {
  std::vector<double> se(dim, 0.0);
  const std::size_t g = groups.size();
  if (g < 2) return se;
  std::vector<double> mean(dim, 0.0);
  for (const auto& v : groups) {
    for (std::size_t k = 0; k < dim; ++k) mean[k] += v[k];
  }
  for (double& m : mean) m /= static_cast<double>(g);
  for (const auto& v : groups) {
    for (std::size_t k = 0; k < dim; ++k) se[k] += (v[k] - mean[k]) * (v[k] - mean[k]);
  }
  const double scale = 1.0 / (static_cast<double>(g - 1) * static_cast<double>(g));
  for (double& v : se) v = std::sqrt(v * scale);
  return se;
}

void record(GradEstimate& est, const PhaseMoments& m) {
  est.meta.betas.push_back(m.beta);
  est.meta.sample_counts.push_back(m.count);
  est.meta.seeds.push_back(m.seed);
  est.meta.mean_losses.push_back(m.mean_loss);
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::ExpectationContrast: return "expectation-contrast";
    case Method::IntegratedCovariance: return "integrated-covariance";
    case Method::ClassicalEP: return "classical-ep";
    case Method::PathIntegral: return "path-integral";
    case Method::SupervisedCovariance: return "supervised-covariance";
  }
  return "?";
}

PhaseMoments batch_moments(const System& sys, const ParamVector& theta,
                           const sampler::SampleBatch& batch, bool with_covariance) {
  const EnergyModel& model = sys.energy();
  const std::size_t p = model.param_dim();
  const std::size_t total = batch.size();
  if (total == 0) throw EstimationError("phase batch is empty");
  if (with_covariance && total < 2) {
    throw EstimationError("covariance needs at least 2 samples per node, got " + std::to_string(total));
  }

  // Group boundaries (sample indices).
  std::vector<std::size_t> bounds;
  if (batch.n_chains() >= 2) {
    bounds = batch.chain_offsets;
  } else {
    const std::size_t g = std::min(kSingleChainBlocks, total);
    for (std::size_t b = 0; b <= g; ++b) bounds.push_back(b * total / g);
  }
  const std::size_t groups = bounds.size() - 1;
  const std::size_t n = batch.state_dim;

  std::vector<double> losses(total);
  for (std::size_t i = 0; i < total; ++i) losses[i] = sys.loss(batch.sample(i));

  std::vector<std::vector<double>> sums(groups, std::vector<double>(p, 0.0));
  std::vector<std::vector<double>> centred(with_covariance ? groups : 0, std::vector<double>(p, 0.0));
  std::vector<double> group_loss(groups, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = bounds[g], hi = bounds[g + 1];
    const std::size_t count = hi - lo;
    if (count == 0) continue;
    const auto states = std::span<const double>(batch.data).subspan(lo * n, count * n);
    const std::vector<double> ones(count, 1.0);
    model.accumulate_grad_theta(theta, states, ones, sums[g]);
    double lsum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) lsum += losses[i];
    group_loss[g] = lsum / static_cast<double>(count);
    if (with_covariance) {
      std::vector<double> w(count);
      for (std::size_t i = 0; i < count; ++i) w[i] = losses[lo + i] - group_loss[g];
      model.accumulate_grad_theta(theta, states, w, centred[g]);
    }
  }

  PhaseMoments m;
  m.beta = batch.beta;
  m.count = total;
  double lsum = 0.0;
  for (double l : losses) lsum += l;
  m.mean_loss = lsum / static_cast<double>(total);

  m.mean_grad.assign(p, 0.0);
  std::vector<std::vector<double>> group_means;
  for (std::size_t g = 0; g < groups; ++g) {
    const double count = static_cast<double>(bounds[g + 1] - bounds[g]);
    if (count == 0.0) continue;
    std::vector<double> gm(p);
    for (std::size_t k = 0; k < p; ++k) {
      m.mean_grad[k] += sums[g][k];
      gm[k] = sums[g][k] / count;
    }
    group_means.push_back(std::move(gm));
  }
  for (double& v : m.mean_grad) v /= static_cast<double>(total);
  m.mean_grad_se = group_std_err(group_means, p);

  if (with_covariance) {
    // Pooled Σ_i (ℓ_i − ℓ̄) g_i = Σ_g [Σ_{i∈g} (ℓ_i − ℓ̄_g) g_i + (ℓ̄_g − ℓ̄) Σ_{i∈g} g_i].
    m.cov.assign(p, 0.0);
    std::vector<std::vector<double>> group_covs;
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t count = bounds[g + 1] - bounds[g];
      if (count == 0) continue;
      const double shift = group_loss[g] - m.mean_loss;
      for (std::size_t k = 0; k < p; ++k) m.cov[k] += centred[g][k] + shift * sums[g][k];
      if (count >= 2) {
        std::vector<double> gc(p);
        for (std::size_t k = 0; k < p; ++k) gc[k] = centred[g][k] / static_cast<double>(count - 1);
        group_covs.push_back(std::move(gc));
      }
    }
    for (double& v : m.cov) v /= static_cast<double>(total - 1);
    m.cov_se = group_std_err(group_covs, p);
  }
  return m;
}

MonteCarloSource::MonteCarloSource(const System& sys, const ParamVector& theta, Temperature temp,
                                   sampler::ChainConfig cfg, std::optional<StateVector> init,
                                   Exec exec)
    : sys_(sys), theta_(theta), temp_(temp), cfg_(cfg), init_(std::move(init)), exec_(exec) {}

PhaseMoments MonteCarloSource::moments(double beta, std::uint64_t phase, bool with_covariance) {
  auto cfg = cfg_;
  cfg.seed = derive_seed(cfg_.seed, {phase});
  const auto batch = sampler::run_chains(sys_, theta_, beta, temp_, cfg, init_, exec_);
  auto m = batch_moments(sys_, theta_, batch, with_covariance);
  m.seed = cfg.seed;
  return m;
}

PhaseMoments ExactSource::moments(double beta, std::uint64_t, bool with_covariance) {
  const auto table = oracle::gibbs_table(sys_, theta_, NudgeStrength(beta), temp_);
  PhaseMoments m;
  m.beta = beta;
  m.count = table.size();
  m.mean_loss = oracle::expectation(table, [&](std::span<const double> s) { return sys_.loss(s); });
  m.mean_grad = oracle::expected_grad_theta(table, sys_, theta_);
  m.mean_grad_se.assign(m.mean_grad.size(), 0.0);
  if (with_covariance) {
    m.cov = oracle::loss_grad_covariance(table, sys_, theta_);
    m.cov_se.assign(m.cov.size(), 0.0);
  }
  return m;
}

namespace {

GradEstimate two_phase(ExpectationSource& src, const ParamVector& theta, double beta_small,
                       Method tag) {
  if (!(beta_small > 0.0 && beta_small <= 1.0)) {
    throw InputError("classical EP: nudging strength must lie in (0, 1]");
  }
  const auto free = src.moments(0.0, 0, false);
  const auto nudged = src.moments(beta_small, 1, false);
  const std::size_t p = free.mean_grad.size();
  std::vector<double> g(p), se(p);
  for (std::size_t k = 0; k < p; ++k) {
    g[k] = (nudged.mean_grad[k] - free.mean_grad[k]) / beta_small;
    se[k] = std::hypot(nudged.mean_grad_se[k], free.mean_grad_se[k]) / beta_small;
  }
  GradEstimate est;
  est.grad = theta.with_values(std::move(g));
  est.std_err = std::move(se);
  est.method = tag;
  record(est, free);
  record(est, nudged);
  return est;
}

}  // namespace

GradEstimate contrast(ExpectationSource& src, const ParamVector& theta) {
  return two_phase(src, theta, 1.0, Method::ExpectationContrast);
}

GradEstimate classical_ep(ExpectationSource& src, const ParamVector& theta, double beta_small) {
  return two_phase(src, theta, beta_small, Method::ClassicalEP);
}

GradEstimate covariance(ExpectationSource& src, const ParamVector& theta, Temperature temp,
                        const QuadratureSpec& quad, Method tag) {
  quad.validate();
  const double t = temp.value();
  GradEstimate est;
  est.method = tag;
  std::vector<double> g, var;
  for (std::size_t k = 0; k < quad.size(); ++k) {
    const auto m = src.moments(quad.nodes[k], 2 + k, true);
    if (g.empty()) {
      g.assign(m.cov.size(), 0.0);
      var.assign(m.cov.size(), 0.0);
    }
    const double w = quad.weights[k] / t;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] -= w * m.cov[i];
      var[i] += w * w * m.cov_se[i] * m.cov_se[i];
    }
    record(est, m);
  }
  for (double& v : var) v = std::sqrt(v);
  est.grad = theta.with_values(std::move(g));
  est.std_err = std::move(var);
  return est;
}

GradEstimate supervised(ExpectationSource& src, const ParamVector& theta, Temperature temp) {
  const auto m = src.moments(0.0, 0, true);
  const double t = temp.value();
  std::vector<double> g(m.cov.size()), se(m.cov.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = -m.cov[i] / t;
    se[i] = m.cov_se[i] / t;
  }
  GradEstimate est;
  est.method = Method::SupervisedCovariance;
  est.grad = theta.with_values(std::move(g));
  est.std_err = std::move(se);
  record(est, m);
  return est;
}

GradEstimate grad_contrast_mc(const System& sys, const ParamVector& theta, Temperature temp,
                              const sampler::ChainConfig& cfg,
                              const std::optional<StateVector>& init, Exec exec) {
  MonteCarloSource src(sys, theta, temp, cfg, init, exec);
  return contrast(src, theta);
}

GradEstimate grad_covariance_mc(const System& sys, const ParamVector& theta, Temperature temp,
                                const QuadratureSpec& quad, const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init, Exec exec) {
  MonteCarloSource src(sys, theta, temp, cfg, init, exec);
  return covariance(src, theta, temp, quad, Method::IntegratedCovariance);
}

GradEstimate grad_classical_ep(const System& sys, const ParamVector& theta, Temperature temp,
                               double beta_small, const sampler::ChainConfig& cfg,
                               const std::optional<StateVector>& init, Exec exec) {
  MonteCarloSource src(sys, theta, temp, cfg, init, exec);
  return classical_ep(src, theta, beta_small);
}

GradEstimate grad_path_integral(const System& sys, const ParamVector& theta, Temperature temp,
                                const QuadratureSpec& quad, const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init, Exec exec) {
  MonteCarloSource src(sys, theta, temp, cfg, init, exec);
  return covariance(src, theta, temp, quad, Method::PathIntegral);
}

GradEstimate grad_supervised_mc(const System& sys, const ParamVector& theta, Temperature temp,
                                const sampler::ChainConfig& cfg,
                                const std::optional<StateVector>& init, Exec exec) {
  MonteCarloSource src(sys, theta, temp, cfg, init, exec);
  return supervised(src, theta, temp);
}

GradEstimate average(const std::vector<GradEstimate>& parts) {
  if (parts.empty()) throw EstimationError("cannot average zero gradient estimates");
  const std::size_t p = parts.front().grad.size();
  std::vector<double> g(p, 0.0), var(p, 0.0);
  GradEstimate out;
  out.method = parts.front().method;
  for (const auto& e : parts) {
    for (std::size_t k = 0; k < p; ++k) {
      g[k] += e.grad[k];
      var[k] += e.std_err[k] * e.std_err[k];
    }
    out.meta.sample_counts.insert(out.meta.sample_counts.end(), e.meta.sample_counts.begin(),
                                  e.meta.sample_counts.end());
  }
  const double m = static_cast<double>(parts.size());
  for (std::size_t k = 0; k < p; ++k) {
    g[k] /= m;
    var[k] = std::sqrt(var[k]) / m;
  }
  out.meta.betas = parts.front().meta.betas;
  // mean loss per phase, averaged over the parts
  out.meta.mean_losses.assign(parts.front().meta.mean_losses.size(), 0.0);
  for (const auto& e : parts) {
    for (std::size_t k = 0; k < out.meta.mean_losses.size(); ++k) out.meta.mean_losses[k] += e.meta.mean_losses[k] / m;
  }
  out.grad = parts.front().grad.with_values(std::move(g));
  out.std_err = std::move(var);
  return out;
}

}  // namespace tep::estimators
