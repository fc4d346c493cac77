#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "tep/core.hpp"

namespace tep::checks {

/// One row of a pass/fail table.
struct CheckRow {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;      // worst observed value of the checked quantity
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<CheckRow> rows;
  bool all_passed() const;
  const CheckRow* first_failure() const;
};

/// check,cases,worst,threshold,status,detail
void write_report_csv(const Report& report, std::ostream& out);

struct IdentityParams {
  std::size_t n_instances = 100;
  std::size_t n_spins = 8;
  std::uint64_t seed = 1;
  double coupling_scale = 1.0;
  double t_min = 0.5;  // temperatures are drawn uniformly from [t_min, t_max]
  double t_max = 2.0;
  double fd_step = 1e-5;
  double fd_tol = 1e-6;
  double identity_tol = 1e-10;
  std::size_t trial_distributions = 100;
  std::vector<std::size_t> quad_nodes{5, 9, 17, 33};  // successive halvings of the spacing
  double min_order = 1.9;

  void validate() const;
};

/// Replaceable pieces of the suite, so failure paths can be exercised.
struct IdentityHooks {
  std::function<double(const System&, const ParamVector&, Temperature)> decomposition_residual;
};

IdentityHooks default_hooks();

/// Exact identities and inequalities on random spin-glass instances, one row each:
/// grad_contrast_fd, dA_dbeta_fd, quadrature_order, upper_bound,
/// decomposition_residual, variational_bound.
Report run_identity_suite(const IdentityParams& params, const IdentityHooks& hooks = default_hooks());

/// Relative finite-difference error of every analytic gradient of the bundled models.
Report run_gradient_checks(std::uint64_t seed, double h = 1e-6, double tol = 1e-6);

struct GibbsTvParams {
  std::size_t n_spins = 8;
  std::size_t n_instances = 3;
  std::size_t n_samples = 100000;
  std::size_t n_chains = 10;
  double temperature = 1.0;
  double coupling_scale = 0.5;
  std::uint64_t seed = 1;
};

/// Total-variation distance between binary Gibbs sweeps and enumeration.
CheckRow gibbs_tv_check(const GibbsTvParams& params, double tol = 0.02);

struct GaussianParams {
  std::size_t dim = 3;
  std::size_t n_chains = 20;
  std::size_t n_steps = 3000;
  std::uint64_t seed = 1;
  double n_sigma = 3.0;
  double min_ess = 1000.0;
};

/// Adjusted Langevin on a standard Gaussian: every covariance entry within
/// n_sigma between-chain standard errors of the identity, with total ESS ≥ min_ess.
CheckRow gaussian_covariance_check(const GaussianParams& params);

/// Default-step acceptance of adjusted Langevin on the bundled continuous models.
/// Rows outside (0.4, 0.9) fail.
Report acceptance_checks(std::uint64_t seed);

}  // namespace tep::checks
