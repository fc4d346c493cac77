#include "tep/checks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "tep/models.hpp"
#include "tep/oracle.hpp"
#include "tep/quadrature.hpp"
#include "tep/rng.hpp"
#include "tep/sampler.hpp"

namespace tep::checks {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

struct Instance {
  System sys;
  ParamVector theta;
  Temperature temp{1.0};
};

Instance make_instance(const IdentityParams& p, std::size_t i) {
  const std::uint64_t s = derive_seed(p.seed, {i});
  auto model = std::make_shared<const models::SpinGlassModel>(p.n_spins);
  Rng rng(derive_seed(s, {2}));
  std::uniform_real_distribution<double> t_dist(p.t_min, p.t_max);
  const double t = t_dist(rng);
  const double target = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  return Instance{System{model, models::SpinGlassModel::output_loss(p.n_spins - 1, target)},
                  model->random_params(derive_seed(s, {1}), p.coupling_scale), Temperature(t)};
}

struct InstanceResult {
  double fd_err = 0.0;
  double dadb_err = 0.0;
  double order = std::numeric_limits<double>::infinity();
  double finest_err = 0.0;
  double bound_gap = 0.0;  // J − 𝔼_0[ℓ]
  double residual = 0.0;
  double vfe_equality = 0.0;
  double vfe_min_gap = std::numeric_limits<double>::infinity();
};

InstanceResult run_instance(const IdentityParams& p, const IdentityHooks& hooks, std::size_t i) {
  const auto inst = make_instance(p, i);
  const auto& sys = inst.sys;
  const auto& theta = inst.theta;
  const Temperature t = inst.temp;
  const double h = p.fd_step;
  InstanceResult r;

  const auto exact = oracle::exact_grad_J_contrast(sys, theta, t);
  // Differences of J − c with c fixed at J(θ): c cancels exactly, and the
  // small excess keeps full relative precision.
  const double c = oracle::contrastive_objective(sys, theta, t);
  auto excess = [&](const std::vector<double>& v) {
    return oracle::free_energy_difference(sys, theta.with_values(v), NudgeStrength(0.0), NudgeStrength(1.0), t, c);
  };
  std::vector<double> work(theta.values().begin(), theta.values().end());
  std::vector<double> fd(work.size()), diff(work.size());
  for (std::size_t k = 0; k < work.size(); ++k) {
    const double saved = work[k];
    work[k] = saved + h;
    const double up = excess(work);
    work[k] = saved - h;
    const double down = excess(work);
    work[k] = saved;
    fd[k] = (up - down) / (2.0 * h);
    diff[k] = exact[k] - fd[k];
  }
  r.fd_err = norm_inf(diff) / (norm_inf(fd) + kRelErrFloor);

  Rng rng(derive_seed(p.seed, {i, 3}));
  std::uniform_real_distribution<double> beta_dist(0.1, 0.9);
  const double b0 = beta_dist(rng);
  const double dadb = oracle::exact_dA_dbeta(sys, theta, NudgeStrength(b0), t);
  const double fd_b =
      oracle::free_energy_difference(sys, theta, NudgeStrength(b0 - h), NudgeStrength(b0 + h), t) / (2.0 * h);
  r.dadb_err = std::abs(dadb - fd_b) / (std::abs(fd_b) + kRelErrFloor);

  std::vector<double> errs;
  for (std::size_t k : p.quad_nodes) {
    const auto g = oracle::exact_grad_J_covariance(sys, theta, t, QuadratureSpec::trapezoid(k));
    for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = g[c] - exact[c];
    errs.push_back(norm_inf(diff));
  }
  r.finest_err = errs.back();
  const double floor = 1e-13 * (norm_inf(exact.values()) + 1.0);
  const double prev = errs[errs.size() - 2];
  if (prev > floor) r.order = std::log2(prev / std::max(errs.back(), std::numeric_limits<double>::min()));

  const double j = oracle::contrastive_objective(sys, theta, t);
  const double e0 = oracle::gibbs_expectation(sys, theta, NudgeStrength(0.0), t,
                                              [&](std::span<const double> s) { return sys.loss(s); });
  r.bound_gap = j - e0;
  r.residual = std::abs(hooks.decomposition_residual(sys, theta, t));

  const double bv = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const NudgeStrength beta(bv);
  const auto table = oracle::gibbs_table(sys, theta, beta, t, Exec::Serial);
  const double a = -t.value() * table.log_z;
  r.vfe_equality = std::abs(oracle::variational_free_energy(sys, theta, beta, t, table.probs) - a);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> q(table.size());
  for (std::size_t trial = 0; trial < p.trial_distributions; ++trial) {
    double z = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) {
      // Alternate broad random distributions with small perturbations of ρ_β.
      q[s] = trial % 2 == 0 ? expo(rng) : table.probs[s] * std::exp(0.1 * normal(rng));
      z += q[s];
    }
    for (double& v : q) v /= z;
    r.vfe_min_gap = std::min(r.vfe_min_gap, oracle::variational_free_energy(sys, theta, beta, t, q) - a);
  }
  return r;
}

CheckRow make_row(std::string name, std::size_t cases, double worst, double threshold, bool passed,
                  std::string detail = {}) {
  return CheckRow{std::move(name), cases, worst, threshold, passed, std::move(detail)};
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

}  // namespace

bool Report::all_passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.passed; });
}

const CheckRow* Report::first_failure() const {
  for (const auto& r : rows) {
    if (!r.passed) return &r;
  }
  return nullptr;
}

void write_report_csv(const Report& report, std::ostream& out) {
  out << "check,cases,worst,threshold,status,detail\n";
  const auto flags = out.flags();
  out << std::setprecision(9);
  for (const auto& r : report.rows) {
    out << r.name << ',' << r.cases << ',' << r.worst << ',' << r.threshold << ','
        << (r.passed ? "PASS" : "FAIL") << ',' << r.detail << '\n';
  }
  out.flags(flags);
}

void IdentityParams::validate() const {
  if (n_instances == 0) throw InputError("identity suite: n_instances must be at least 1");
  if (n_spins < 2 || n_spins > oracle::Limits{}.n_max) {
    throw InputError("identity suite: n_spins must lie in [2, " + std::to_string(oracle::Limits{}.n_max) + "]");
  }
  if (!(t_min > 0.0 && t_max >= t_min)) throw InputError("identity suite: need 0 < t_min ≤ t_max");
  if (!(fd_step > 0.0 && fd_step < 0.1)) throw InputError("identity suite: fd_step must lie in (0, 0.1)");
  if (quad_nodes.size() < 2) throw InputError("identity suite: need at least two quadrature levels");
  for (std::size_t i = 1; i < quad_nodes.size(); ++i) {
    if (quad_nodes[i] != 2 * quad_nodes[i - 1] - 1) {
      throw InputError("identity suite: quadrature levels must halve the spacing (k → 2k − 1)");
    }
  }
}

IdentityHooks default_hooks() {
  return IdentityHooks{[](const System& sys, const ParamVector& theta, Temperature t) {
    return oracle::decomposition_residual(sys, theta, t);
  }};
}

Report run_identity_suite(const IdentityParams& params, const IdentityHooks& hooks) {
  params.validate();
  if (!hooks.decomposition_residual) throw InputError("identity suite: missing residual hook");
  std::vector<InstanceResult> results(params.n_instances);
  detail::for_each_index(params.n_instances, Exec::Parallel,
                         [&](std::size_t i) { results[i] = run_instance(params, hooks, i); });

  InstanceResult worst;
  worst.bound_gap = -std::numeric_limits<double>::infinity();
  for (const auto& r : results) {
    worst.fd_err = std::max(worst.fd_err, r.fd_err);
    worst.dadb_err = std::max(worst.dadb_err, r.dadb_err);
    worst.order = std::min(worst.order, r.order);
    worst.finest_err = std::max(worst.finest_err, r.finest_err);
    worst.bound_gap = std::max(worst.bound_gap, r.bound_gap);
    worst.residual = std::max(worst.residual, r.residual);
    worst.vfe_equality = std::max(worst.vfe_equality, r.vfe_equality);
    worst.vfe_min_gap = std::min(worst.vfe_min_gap, r.vfe_min_gap);
  }
  const std::size_t n = params.n_instances;
  Report rep;
  rep.rows.push_back(make_row("grad_contrast_fd", n, worst.fd_err, params.fd_tol, worst.fd_err <= params.fd_tol));
  rep.rows.push_back(make_row("dA_dbeta_fd", n, worst.dadb_err, params.fd_tol, worst.dadb_err <= params.fd_tol));
  rep.rows.push_back(make_row("quadrature_order", n, worst.order, params.min_order, worst.order >= params.min_order,
                              "finest max error " + fmt(worst.finest_err)));
  rep.rows.push_back(make_row("upper_bound", n, worst.bound_gap, 0.0, worst.bound_gap <= 0.0,
                              "max of J - E0[loss]"));
  rep.rows.push_back(make_row("decomposition_residual", n, worst.residual, params.identity_tol,
                              worst.residual <= params.identity_tol));
  // A bound violation counts once it exceeds rounding at the identity tolerance.
  const double vfe_worst = std::max(worst.vfe_equality, std::max(0.0, -worst.vfe_min_gap));
  rep.rows.push_back(make_row("variational_bound", n * (params.trial_distributions + 1), vfe_worst,
                              params.identity_tol, vfe_worst <= params.identity_tol,
                              "min gap " + fmt(worst.vfe_min_gap) + "; equality error " + fmt(worst.vfe_equality)));
  return rep;
}

Report run_gradient_checks(std::uint64_t seed, double h, double tol) {
  Report rep;
  Rng rng(derive_seed(seed, {0x9c}));
  auto add = [&](const std::string& name, double err) {
    rep.rows.push_back(make_row(name, 1, err, tol, err <= tol));
  };

  {
    const models::LinearModel m(5);
    const ParamVector theta(random_vector(rng, 5));
    const auto s = random_vector(rng, 5);
    add("linear:grad_theta", check_grad_theta(m, theta, s, h));
    add("linear:grad_state", check_grad_state(m, theta, s, h));
  }
  {
    const models::QuadraticModel m(5);
    const ParamVector theta(random_vector(rng, 5));
    const auto s = random_vector(rng, 5);
    add("quadratic:grad_theta", check_grad_theta(m, theta, s, h));
    add("quadratic:grad_state", check_grad_state(m, theta, s, h));
  }
  {
    const models::TwoStateModel m;
    const ParamVector theta(random_vector(rng, 1));
    const std::vector<double> s{1.0};
    add("two-state:grad_theta", check_grad_theta(m, theta, s, h));
  }
  {
    const models::SpinGlassModel m(6);
    const auto theta = m.random_params(derive_seed(seed, {0x9d}));
    std::vector<double> s(6);
    for (double& v : s) v = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    add("spin-glass:grad_theta", check_grad_theta(m, theta, s, h));
  }
  {
    const models::LayerSizes z{4, 5, 3};
    const models::LayeredTanhEnergyNet m(z);
    const auto theta = m.init_params(derive_seed(seed, {0x9e})).with_values(random_vector(rng, m.param_dim(), 0.5));
    const auto s = random_vector(rng, m.state_dim());
    add("layered-tanh:grad_theta", check_grad_theta(m, theta, s, h));
    add("layered-tanh:grad_state", check_grad_state(m, theta, s, h));

    // Bound energies must agree with the model on the free units.
    const auto bound = m.bind(theta, s);
    std::vector<double> g_model(m.state_dim()), g_bound(m.state_dim()), diff(m.state_dim(), 0.0);
    m.grad_state_energy(theta, s, g_model);
    bound->grad_state(s, g_bound);
    for (std::size_t i = z.n_in; i < m.state_dim(); ++i) diff[i] = g_model[i] - g_bound[i];
    const double e_gap = std::abs(bound->energy(s) - m.energy(theta, s));
    add("layered-tanh:bound_energy", std::max(e_gap, norm_inf(diff)) / (std::abs(m.energy(theta, s)) + 1.0));

    const auto target = models::one_hot(1, z.n_out);
    const auto loss = m.loss_for_example(target);
    std::vector<double> gl(m.state_dim()), work(s), fd(m.state_dim()), dl(m.state_dim());
    loss.grad_state(s, gl);
    for (std::size_t i = 0; i < work.size(); ++i) {
      const double saved = work[i];
      work[i] = saved + h;
      const double up = loss(work);
      work[i] = saved - h;
      const double down = loss(work);
      work[i] = saved;
      fd[i] = (up - down) / (2.0 * h);
      dl[i] = gl[i] - fd[i];
    }
    add("layered-tanh:loss_grad_state", norm_inf(dl) / (norm_inf(fd) + kRelErrFloor));

    const models::FeedforwardBaseline ff(z);
    const auto x = random_vector(rng, z.n_in);
    const auto g = ff.backprop_grad(theta, x, target);
    std::vector<double> tw(theta.values().begin(), theta.values().end()), fdt(tw.size()), dt(tw.size());
    for (std::size_t k = 0; k < tw.size(); ++k) {
      const double saved = tw[k];
      tw[k] = saved + h;
      const double up = ff.loss(theta.with_values(tw), x, target);
      tw[k] = saved - h;
      const double down = ff.loss(theta.with_values(tw), x, target);
      tw[k] = saved;
      fdt[k] = (up - down) / (2.0 * h);
      dt[k] = g[k] - fdt[k];
    }
    add("feedforward:backprop", norm_inf(dt) / (norm_inf(fdt) + kRelErrFloor));
  }
  return rep;
}

CheckRow gibbs_tv_check(const GibbsTvParams& p, double tol) {
  if (p.n_spins > 16 || p.n_chains == 0 || p.n_samples < p.n_chains) {
    throw InputError("gibbs check: invalid parameters");
  }
  double worst = 0.0;
  for (std::size_t inst = 0; inst < p.n_instances; ++inst) {
    auto model = std::make_shared<const models::SpinGlassModel>(p.n_spins);
    const System sys{model, models::SpinGlassModel::output_loss(p.n_spins - 1, 1.0)};
    const auto theta = model->random_params(derive_seed(p.seed, {inst, 1}), p.coupling_scale);
    const double beta = 0.5;
    const Temperature t(p.temperature);
    sampler::ChainConfig cfg;
    cfg.kernel = sampler::Kernel::GibbsSweepBinary;
    cfg.n_chains = p.n_chains;
    cfg.burn_in = 500;
    cfg.n_steps = cfg.burn_in + p.n_samples / p.n_chains;
    cfg.seed = derive_seed(p.seed, {inst, 2});
    const auto batch = sampler::run_chains(sys, theta, beta, t, cfg);
    const auto table = oracle::gibbs_table(sys, theta, NudgeStrength(beta), t);
    std::vector<double> freq(table.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto s = batch.sample(i);
      std::size_t idx = 0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] > 0.0) idx |= std::size_t{1} << j;
      }
      freq[idx] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k) {
      tv += std::abs(freq[k] / static_cast<double>(batch.size()) - table.probs[k]);
    }
    worst = std::max(worst, 0.5 * tv);
  }
  return make_row("gibbs_tv", p.n_instances, worst, tol, worst <= tol,
                  std::to_string(p.n_samples) + " samples per instance");
}

CheckRow gaussian_covariance_check(const GaussianParams& p) {
  const std::size_t d = p.dim;
  const System sys{std::make_shared<const models::QuadraticModel>(d), Loss::zero()};
  const ParamVector theta(d);
  sampler::ChainConfig cfg;
  cfg.kernel = sampler::Kernel::LangevinMetropolisAdjusted;
  cfg.n_chains = p.n_chains;
  cfg.n_steps = p.n_steps;
  cfg.burn_in = p.n_steps / 5;
  cfg.seed = p.seed;
  const auto batch = sampler::run_chains(sys, theta, 0.0, Temperature(1.0), cfg,
                                         StateVector::continuous(std::vector<double>(d, 0.0)));
  double ess = 0.0;
  for (double e : batch.ess) ess += e;

  // Per-chain second moments about the known zero mean.
  const std::size_t c_count = batch.n_chains();
  std::vector<std::vector<double>> per_chain(c_count, std::vector<double>(d * d, 0.0));
  for (std::size_t c = 0; c < c_count; ++c) {
    const auto data = batch.chain_data(c);
    const std::size_t m = batch.chain_size(c);
    for (std::size_t r = 0; r < m; ++r) {
      const auto s = data.subspan(r * d, d);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) per_chain[c][i * d + j] += s[i] * s[j];
      }
    }
    for (double& v : per_chain[c]) v /= static_cast<double>(m);
  }
  double worst_z = 0.0;
  for (std::size_t k = 0; k < d * d; ++k) {
    double mean = 0.0;
    for (const auto& pc : per_chain) mean += pc[k];
    mean /= static_cast<double>(c_count);
    double ss = 0.0;
    for (const auto& pc : per_chain) ss += (pc[k] - mean) * (pc[k] - mean);
    const double se = std::sqrt(ss / static_cast<double>(c_count - 1) / static_cast<double>(c_count));
    const double target = (k / d == k % d) ? 1.0 : 0.0;
    worst_z = std::max(worst_z, std::abs(mean - target) / se);
  }
  const bool ok = worst_z <= p.n_sigma && ess >= p.min_ess;
  return make_row("gaussian_covariance", d * d, worst_z, p.n_sigma, ok,
                  "ess " + fmt(ess) + "; acceptance " + fmt(batch.acceptance_rate.value_or(0.0)));
}

Report acceptance_checks(std::uint64_t seed) {
  Report rep;
  sampler::ChainConfig cfg;
  cfg.n_chains = 4;
  cfg.n_steps = 500;
  cfg.burn_in = 100;
  auto run = [&](const std::string& name, const System& sys, const ParamVector& theta, double t,
                 const std::vector<double>& init) {
    cfg.seed = derive_seed(seed, {rep.rows.size()});
    const auto batch = sampler::run_chains(sys, theta, 0.0, Temperature(t), cfg, StateVector::continuous(init));
    const double rate = batch.acceptance_rate.value_or(0.0);
    rep.rows.push_back(make_row(name, 1, rate, 0.4, rate > 0.4 && rate < 0.9, "acceptance in (0.4, 0.9)"));
  };
  Rng rng(derive_seed(seed, {0xacc}));
  {
    const System sys{std::make_shared<const models::QuadraticModel>(4), Loss::zero()};
    run("quadratic@T=1", sys, ParamVector(4), 1.0, std::vector<double>(4, 0.0));
  }
  for (const auto& [label, z, t] : {std::tuple{"layered-tanh-small@T=1", models::LayerSizes{8, 6, 3}, 1.0},
                                    std::tuple{"layered-tanh-fashion@T=0.01", models::LayerSizes{784, 64, 10}, 0.01}}) {
    auto net = std::make_shared<const models::LayeredTanhEnergyNet>(z);
    const auto theta = net->init_params(derive_seed(seed, {0xacd}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(z.n_in);
    for (double& v : x) v = unit(rng);
    run(label, System{net, Loss::zero()}, theta, t, net->make_state(x));
  }
  return rep;
}

}  // namespace tep::checks
