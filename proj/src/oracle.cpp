#include "tep/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace tep::oracle {

namespace {

void require_enumerable(const EnergyModel& model, const Limits& limits) {
  if (model.state_kind() != StateKind::Binary) {
    throw EnumerationRefused(model.name() + ": enumeration needs a binary state space");
  }
  if (model.state_dim() > limits.n_max) {
    throw EnumerationRefused(model.name() + ": " + std::to_string(model.state_dim()) +
                             " units exceed the enumeration cap of " +
                             std::to_string(limits.n_max));
  }
}

}  // namespace

GibbsTable gibbs_table(const System& sys, const ParamVector& theta, NudgeStrength beta,
                       Temperature temp, Exec exec, Limits limits) {
  const EnergyModel& model = sys.energy();
  require_enumerable(model, limits);
  model.validate_params(theta);

  const std::size_t n = model.state_dim();
  const std::size_t count = std::size_t{1} << n;
  const auto levels = model.binary_levels();
  const double b = beta.value();
  const double t = temp.value();

  GibbsTable table;
  table.state_dim = n;
  table.beta = b;
  table.temperature = t;
  table.states.resize(count * n);
  table.log_weights.resize(count);
  table.probs.resize(count);

  detail::for_each_index(detail::block_count(count), exec, [&](std::size_t blk) {
    const std::size_t lo = blk * detail::kBlock;
    const std::size_t hi = std::min(count, lo + detail::kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      double* s = table.states.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) s[j] = levels[(i >> j) & 1U];
      const std::span<const double> state(s, n);
      const double e = model.energy(theta, state);
      const double l = sys.loss(state);
      if (!std::isfinite(e)) throw EvaluationError("enumeration: energy term is not finite");
      if (!std::isfinite(l)) throw EvaluationError("enumeration: loss term is not finite");
      table.log_weights[i] = -(e + b * l) / t;
    }
  });

  const double shift = *std::max_element(table.log_weights.begin(), table.log_weights.end());
  const double z = detail::reduce_sum(count, exec, [&](std::size_t i) {
    return std::exp(table.log_weights[i] - shift);
  });
  table.log_z = shift + std::log(z);
  for (std::size_t i = 0; i < count; ++i) table.probs[i] = std::exp(table.log_weights[i] - table.log_z);
  return table;
}

double expectation(const GibbsTable& table, const StateFunction& f, Exec exec) {
  return detail::reduce_sum(table.size(), exec, [&](std::size_t i) {
    return table.probs[i] * f(table.state(i));
  });
}

std::vector<double> expectation(const GibbsTable& table, const VectorStateFunction& f,
                                std::size_t dim, Exec exec) {
  return detail::reduce_vector(table.size(), dim, exec,
                               [&](std::size_t lo, std::size_t hi, std::span<double> out) {
                                 std::vector<double> v(dim);
                                 for (std::size_t i = lo; i < hi; ++i) {
                                   f(table.state(i), v);
                                   for (std::size_t k = 0; k < dim; ++k) out[k] += table.probs[i] * v[k];
                                 }
                               });
}

std::vector<double> expected_grad_theta(const GibbsTable& table, const System& sys,
                                        const ParamVector& theta, Exec exec) {
  const EnergyModel& model = sys.energy();
  const std::size_t n = table.state_dim;
  return detail::reduce_vector(
      table.size(), model.param_dim(), exec,
      [&](std::size_t lo, std::size_t hi, std::span<double> out) {
        model.accumulate_grad_theta(
            theta, std::span<const double>(table.states).subspan(lo * n, (hi - lo) * n),
            std::span<const double>(table.probs).subspan(lo, hi - lo), out);
      });
}

std::vector<double> loss_grad_covariance(const GibbsTable& table, const System& sys,
                                         const ParamVector& theta, Exec exec) {
  const EnergyModel& model = sys.energy();
  const std::size_t n = table.state_dim;
  const std::size_t count = table.size();
  std::vector<double> losses(count);
  for (std::size_t i = 0; i < count; ++i) losses[i] = sys.loss(table.state(i));
  const double mean_loss =
      detail::reduce_sum(count, exec, [&](std::size_t i) { return table.probs[i] * losses[i]; });
  // Σ_i p_i (ℓ_i − ℓ̄) ∇_θE(s_i)
  std::vector<double> weights(count);
  for (std::size_t i = 0; i < count; ++i) weights[i] = table.probs[i] * (losses[i] - mean_loss);
  return detail::reduce_vector(
      count, model.param_dim(), exec, [&](std::size_t lo, std::size_t hi, std::span<double> out) {
        model.accumulate_grad_theta(
            theta, std::span<const double>(table.states).subspan(lo * n, (hi - lo) * n),
            std::span<const double>(weights).subspan(lo, hi - lo), out);
      });
}

double partition_function(const System& sys, const ParamVector& theta, NudgeStrength beta,
                          Temperature temp, Limits limits) {
  return gibbs_table(sys, theta, beta, temp, Exec::Parallel, limits).log_z;
}

double free_energy(const System& sys, const ParamVector& theta, NudgeStrength beta,
                   Temperature temp, Limits limits) {
  return -temp.value() * partition_function(sys, theta, beta, temp, limits);
}

double free_energy_difference(const System& sys, const ParamVector& theta, NudgeStrength from,
                              NudgeStrength to, Temperature temp, double offset, Limits limits) {
  // A(to) − A(from) − c = −T log 𝔼_from[exp((c − (to − from) ℓ) / T)]. Working
  // with the ratio avoids cancelling two large log-partition values, and a
  // good c keeps the ratio near one where log1p/expm1 stay exact.
  const auto table = gibbs_table(sys, theta, from, temp, Exec::Parallel, limits);
  const double dbeta = to.value() - from.value();
  std::vector<double> x(table.size());
  double ratio = 0.0, shifted = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    x[i] = (offset - dbeta * sys.loss(table.state(i))) / temp.value();
    ratio += table.probs[i] * std::exp(x[i]);
    shifted += table.probs[i] * std::expm1(x[i]);
  }
  if (ratio > 0.5 && ratio < 2.0) return -temp.value() * std::log1p(shifted);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.size(); ++i) m = std::max(m, table.log_prob(i) + x[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) acc += std::exp(table.log_prob(i) + x[i] - m);
  return -temp.value() * (m + std::log(acc));
}

double contrastive_objective(const System& sys, const ParamVector& theta, Temperature temp,
                             Limits limits) {
  return free_energy_difference(sys, theta, NudgeStrength(0.0), NudgeStrength(1.0), temp, 0.0, limits);
}

double gibbs_expectation(const System& sys, const ParamVector& theta, NudgeStrength beta,
                         Temperature temp, const StateFunction& f, Limits limits) {
  return expectation(gibbs_table(sys, theta, beta, temp, Exec::Parallel, limits), f);
}

std::vector<double> gibbs_expectation(const System& sys, const ParamVector& theta,
                                      NudgeStrength beta, Temperature temp,
                                      const VectorStateFunction& f, std::size_t dim,
                                      Limits limits) {
  return expectation(gibbs_table(sys, theta, beta, temp, Exec::Parallel, limits), f, dim);
}

ParamVector exact_grad_J_contrast(const System& sys, const ParamVector& theta, Temperature temp,
                                  Limits limits) {
  return exact_grad_J_beta(sys, theta, NudgeStrength(1.0), temp, limits);
}

ParamVector exact_grad_J_beta(const System& sys, const ParamVector& theta, NudgeStrength beta,
                              Temperature temp, Limits limits) {
  const auto nudged = gibbs_table(sys, theta, beta, temp, Exec::Parallel, limits);
  const auto free = gibbs_table(sys, theta, NudgeStrength(0.0), temp, Exec::Parallel, limits);
  auto g1 = expected_grad_theta(nudged, sys, theta);
  const auto g0 = expected_grad_theta(free, sys, theta);
  for (std::size_t k = 0; k < g1.size(); ++k) g1[k] -= g0[k];
  return theta.with_values(std::move(g1));
}

double exact_dA_dbeta(const System& sys, const ParamVector& theta, NudgeStrength beta,
                      Temperature temp, Limits limits) {
  return gibbs_expectation(sys, theta, beta, temp, [&](std::span<const double> s) { return sys.loss(s); },
                           limits);
}

ParamVector exact_grad_J_covariance(const System& sys, const ParamVector& theta,
                                    Temperature temp, const QuadratureSpec& quad, Limits limits) {
  quad.validate();
  std::vector<double> g(sys.energy().param_dim(), 0.0);
  for (std::size_t k = 0; k < quad.size(); ++k) {
    const auto table = gibbs_table(sys, theta, NudgeStrength(quad.nodes[k]), temp, Exec::Parallel, limits);
    const auto cov = loss_grad_covariance(table, sys, theta);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= quad.weights[k] * cov[i] / temp.value();
  }
  return theta.with_values(std::move(g));
}

ParamVector exact_grad_supervised(const System& sys, const ParamVector& theta, Temperature temp,
                                  Limits limits) {
  const auto table = gibbs_table(sys, theta, NudgeStrength(0.0), temp, Exec::Parallel, limits);
  auto cov = loss_grad_covariance(table, sys, theta);
  for (double& v : cov) v = -v / temp.value();
  return theta.with_values(std::move(cov));
}

double kl_nudged_free(const System& sys, const ParamVector& theta, Temperature temp,
                      Limits limits) {
  const auto nudged = gibbs_table(sys, theta, NudgeStrength(1.0), temp, Exec::Parallel, limits);
  const auto free = gibbs_table(sys, theta, NudgeStrength(0.0), temp, Exec::Parallel, limits);
  const double kl = detail::reduce_sum(nudged.size(), Exec::Parallel, [&](std::size_t i) {
    const double p = nudged.probs[i];
    return p > 0.0 ? p * (nudged.log_prob(i) - free.log_prob(i)) : 0.0;
  });
  return std::max(kl, 0.0);
}

double decomposition_residual(const System& sys, const ParamVector& theta, Temperature temp,
                              Limits limits) {
  const double j = contrastive_objective(sys, theta, temp, limits);
  const double expected_loss = exact_dA_dbeta(sys, theta, NudgeStrength(1.0), temp, limits);
  const double kl = kl_nudged_free(sys, theta, temp, limits);
  return j - (expected_loss + temp.value() * kl);
}

double variational_free_energy(const System& sys, const ParamVector& theta, NudgeStrength beta,
                               Temperature temp, std::span<const double> q, Limits limits) {
  const auto table = gibbs_table(sys, theta, beta, temp, Exec::Parallel, limits);
  if (q.size() != table.size()) {
    throw InputError("variational free energy: q has " + std::to_string(q.size()) +
                     " entries, expected " + std::to_string(table.size()));
  }
  double total = 0.0;
  for (double v : q) {
    if (!(v >= 0.0)) throw InputError("variational free energy: q has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("variational free energy: q is not normalized");
  const double t = temp.value();
  // F_i = −T · log_weight_i; entropy uses 0 log 0 = 0.
  return detail::reduce_sum(table.size(), Exec::Parallel, [&](std::size_t i) {
    if (q[i] == 0.0) return 0.0;
    return q[i] * (-t * table.log_weights[i] + t * std::log(q[i]));
  });
}

}  // namespace tep::oracle
