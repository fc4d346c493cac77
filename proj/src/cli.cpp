#include "tep/cli.hpp"

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <memory>
#include <sstream>

#include "tep/data.hpp"
#include "tep/diagnostics.hpp"
#include "tep/models.hpp"
#include "tep/rng.hpp"
#include "tep/train.hpp"

#ifndef TEP_DATA_DIR
#define TEP_DATA_DIR "data"
#endif

namespace tep::cli {

namespace {

using config::ConfigError;
using config::RunConfig;
using config::format_double;

struct Common {
  std::filesystem::path out;
  std::uint64_t seed = 1;
};

Common read_common(RunConfig& cfg, const std::string& command) {
  Common c;
  c.out = cfg.get_string("out", "out/" + command);
  c.seed = cfg.get_u64("seed", 1);
  const auto threads = cfg.get_size("threads", 0);
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
  return c;
}

// Validates keys, creates the output directory and records the resolved config.
void finish_setup(RunConfig& cfg, const Common& common, const std::string& command) {
  cfg.reject_unknown();
  std::filesystem::create_directories(common.out);
  cfg.write_resolved((common.out / (command + ".cfg")).string());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

std::string bundled(const std::string& file) {
  return (std::filesystem::path(TEP_DATA_DIR) / "fashion-mnist-subset" / file).string();
}

struct Datasets {
  data::Dataset train;
  data::Dataset test;
};

Datasets read_datasets(RunConfig& cfg, std::uint64_t seed) {
  const auto kind = cfg.get_string("dataset", "idx");
  const auto images = cfg.get_string("images", bundled("train-images-idx3-ubyte"));
  const auto labels = cfg.get_string("labels", bundled("train-labels-idx1-ubyte"));
  const auto test_images = cfg.get_string("test_images", bundled("t10k-images-idx3-ubyte"));
  const auto test_labels = cfg.get_string("test_labels", bundled("t10k-labels-idx1-ubyte"));
  const auto limit = cfg.get_size("limit", 0);
  const auto test_limit = cfg.get_size("test_limit", 0);
  const auto classes = cfg.get_size("blobs_classes", 3);
  const auto per_class = cfg.get_size("blobs_per_class", 100);
  const auto test_per_class = cfg.get_size("blobs_test_per_class", 50);
  const auto dim = cfg.get_size("blobs_dim", 8);
  const auto spread = cfg.get_double("blobs_spread", 0.25);

  auto lim = [](std::size_t v) { return v == 0 ? std::nullopt : std::optional<std::size_t>(v); };
  Datasets d;
  if (kind == "idx") {
    d.train = data::load_idx(images, labels, lim(limit), data::Split::Train);
    d.test = data::load_idx(test_images, test_labels, lim(test_limit), data::Split::Test);
  } else if (kind == "blobs") {
    d.train = data::make_blobs(classes, per_class, dim, spread, derive_seed(seed, {0xb1}));
    d.test = data::make_blobs(classes, test_per_class, dim, spread, derive_seed(seed, {0xb2}));
    d.test.split = data::Split::Test;
    if (limit > 0) d.train = d.train.head(std::min(limit, d.train.size()));
    if (test_limit > 0) d.test = d.test.head(std::min(test_limit, d.test.size()));
  } else {
    throw ConfigError("config key 'dataset': expected idx or blobs, got '" + kind + "'");
  }
  return d;
}

QuadratureScheme parse_scheme(const std::string& s) {
  if (s == "trapezoid") return QuadratureScheme::Trapezoid;
  if (s == "gauss") return QuadratureScheme::GaussLegendre;
  throw ConfigError("unknown quadrature scheme '" + s + "' (expected trapezoid or gauss)");
}

sampler::ChainConfig read_chain(RunConfig& cfg, const std::string& prefix, std::size_t chains,
                                std::size_t steps, std::size_t burn_in, const std::string& kernel = "mala") {
  sampler::ChainConfig c;
  c.n_chains = cfg.get_size(prefix + "chains", chains);
  c.n_steps = cfg.get_size(prefix + "steps", steps);
  c.burn_in = cfg.get_size(prefix + "burn_in", burn_in);
  c.thin = cfg.get_size(prefix + "thin", 1);
  c.step_size = cfg.get_double(prefix + "step_size", 0.0);
  c.kernel = sampler::parse_kernel(cfg.get_string(prefix + "kernel", kernel));
  return c;
}

// Training keys shared by `train` and the pretraining stage of `sweep`.
train::TrainConfig read_train_config(RunConfig& cfg, const std::string& prefix, std::uint64_t seed,
                                     std::size_t epochs = 20, double temperature = 0.01) {
  train::TrainConfig tc;
  tc.method = train::parse_method(cfg.get_string(prefix + "method", "ep"));
  tc.beta = cfg.get_double(prefix + "beta", 1.0);
  const auto scheme = parse_scheme(cfg.get_string(prefix + "quad_scheme", "trapezoid"));
  tc.quad = make_quadrature(scheme, cfg.get_size(prefix + "quad_nodes", 3));
  tc.temperature = cfg.get_double(prefix + "temperature", temperature);
  tc.learning_rate = cfg.get_double(prefix + "lr", tc.method == train::TrainMethod::Backprop ? 0.01 : 0.03);
  tc.momentum = cfg.get_double(prefix + "momentum", 0.9);
  tc.batch_size = cfg.get_size(prefix + "batch_size", 20);
  tc.epochs = cfg.get_size(prefix + "epochs", epochs);
  tc.eval_every = cfg.get_size(prefix + "eval_every", 1);
  tc.eval_train_limit = cfg.get_size(prefix + "eval_train_limit", 0);
  tc.hidden = cfg.get_size(prefix + "hidden", 64);
  tc.warm_start = cfg.get_bool(prefix + "warm_start", true);
  tc.relax.step_size = cfg.get_double(prefix + "relax_step", 0.5);
  tc.relax.max_iters = cfg.get_size(prefix + "relax_iters", 200);
  tc.relax.tol = cfg.get_double(prefix + "relax_tol", 1e-6);
  // The path rule spreads the budget over several nodes; more chains keep its noise near EP's.
  const std::size_t chains = tc.method == train::TrainMethod::PathIntegral ? 8 : 4;
  tc.chain = read_chain(cfg, prefix, chains, 50, 10);
  tc.seed = seed;
  return tc;
}

void write_metrics(const std::filesystem::path& path, const train::TrainConfig& tc,
                   const std::vector<train::EpochMetrics>& metrics) {
  auto out = open_out(path);
  out << "epoch,method,beta,train_acc,test_acc,mean_J_estimate\n";
  const double beta = tc.method == train::TrainMethod::EP ? tc.beta
                      : tc.method == train::TrainMethod::PathIntegral ? 1.0
                                                                      : std::nan("");
  for (const auto& m : metrics) {
    out << m.epoch << ',' << train::method_name(tc.method) << ',' << csv_number(beta) << ','
        << csv_number(m.train_acc) << ',' << csv_number(m.test_acc) << ',' << csv_number(m.mean_j) << '\n';
  }
}

void write_summary(const std::filesystem::path& path, const checks::Report& report) {
  auto out = open_out(path);
  checks::write_report_csv(report, out);
}

void log_report(std::ostream& log, const checks::Report& report) {
  for (const auto& r : report.rows) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " worst=" << r.worst << " threshold=" << r.threshold;
    if (!r.detail.empty()) log << " (" << r.detail << ")";
    log << '\n';
  }
}

}  // namespace

int cmd_verify(RunConfig& cfg, std::ostream& log, const checks::IdentityHooks& hooks) {
  const auto common = read_common(cfg, "verify");
  checks::IdentityParams p;
  p.seed = common.seed;
  p.n_instances = cfg.get_size("n_instances", p.n_instances);
  p.n_spins = cfg.get_size("n_spins", p.n_spins);
  p.coupling_scale = cfg.get_double("coupling_scale", p.coupling_scale);
  p.t_min = cfg.get_double("t_min", p.t_min);
  p.t_max = cfg.get_double("t_max", p.t_max);
  p.fd_step = cfg.get_double("fd_step", p.fd_step);
  p.fd_tol = cfg.get_double("fd_tol", p.fd_tol);
  p.identity_tol = cfg.get_double("identity_tol", p.identity_tol);
  p.trial_distributions = cfg.get_size("trial_distributions", p.trial_distributions);
  p.min_order = cfg.get_double("min_order", p.min_order);
  std::vector<double> levels(p.quad_nodes.begin(), p.quad_nodes.end());
  levels = cfg.get_doubles("quad_nodes", levels);
  p.quad_nodes.clear();
  for (double v : levels) {
    if (!(v >= 2.0) || v != std::floor(v)) throw ConfigError("quad_nodes entries must be integers ≥ 2");
    p.quad_nodes.push_back(static_cast<std::size_t>(v));
  }
  if (p.n_instances == 0) throw ConfigError("n_instances must be at least 1");
  p.validate();
  finish_setup(cfg, common, "verify");

  const auto report = checks::run_identity_suite(p, hooks);
  write_summary(common.out / "verify.csv", report);
  log_report(log, report);
  if (const auto* fail = report.first_failure()) {
    log << "verify: first failure: " << fail->name << '\n';
    return kCheckFailed;
  }
  log << "verify: all " << report.rows.size() << " checks passed\n";
  return kOk;
}

int cmd_train(RunConfig& cfg, std::ostream& log) {
  const auto common = read_common(cfg, "train");
  const auto sets = read_datasets(cfg, common.seed);
  const auto tc = read_train_config(cfg, "", common.seed);
  const auto resume_path = cfg.get_string("resume", "");
  tc.validate();
  finish_setup(cfg, common, "train");

  std::optional<train::Checkpoint> resume;
  if (!resume_path.empty()) resume = train::load_checkpoint(resume_path);
  log << "train: " << train::method_name(tc.method) << " on " << sets.train.size() << " train / "
      << sets.test.size() << " test examples\n";
  const auto metrics_path = common.out / "metrics.csv";
  const auto ckpt_path = common.out / "checkpoint.txt";
  train::train(sets.train, sets.test, tc, resume, [&](const train::EpochMetrics& m, const train::Checkpoint& c) {
    train::save_checkpoint(c, ckpt_path.string());
    write_metrics(metrics_path, tc, c.metrics);
    log << "epoch " << m.epoch << " train_acc=" << csv_number(m.train_acc) << " test_acc=" << csv_number(m.test_acc)
        << " mean_J=" << csv_number(m.mean_j) << '\n';
  });
  return kOk;
}

int cmd_sweep(RunConfig& cfg, std::ostream& log) {
  const auto common = read_common(cfg, "sweep");
  const auto model_kind = cfg.get_string("model", "layered-tanh");
  const std::string kernel = model_kind == "spin-glass" ? "gibbs" : "mala";
  diagnostics::SweepConfig sc;
  sc.seed = common.seed;
  sc.grid = cfg.get_doubles("grid", sc.grid);
  // The SNR at small β sits at the 1/√(R−1) floor, so the ratio tracks SNR(1), which grows with samples.
  sc.chain = read_chain(cfg, "", 16, 100, 10, kernel);
  sc.reference = read_chain(cfg, "ref_", 16, 500, 100, kernel);
  sc.snr.repeats = cfg.get_size("snr_repeats", 8);
  sc.snr.mode = diagnostics::parse_snr_mode(cfg.get_string("snr_mode", "run-norm"));
  sc.snr.deterministic = cfg.get_bool("snr_deterministic", false);
  const auto n_probes = cfg.get_size("probes", 20);
  const double temperature = cfg.get_double("temperature", 0.01);
  const auto checkpoint = cfg.get_string("checkpoint", "");
  // Enumerable alternative.
  const auto n_spins = cfg.get_size("n_spins", 8);
  const double coupling_scale = cfg.get_double("coupling_scale", 1.0);

  std::optional<Datasets> sets;
  std::optional<train::TrainConfig> pre;
  if (model_kind == "layered-tanh") {
    sets = read_datasets(cfg, common.seed);
    pre = read_train_config(cfg, "pretrain_", common.seed, 3, temperature);
  } else if (model_kind != "spin-glass") {
    throw ConfigError("config key 'model': expected layered-tanh or spin-glass, got '" + model_kind + "'");
  }
  if (n_probes == 0) throw ConfigError("probes must be at least 1");
  sc.validate();
  finish_setup(cfg, common, "sweep");

  const Temperature temp(temperature);
  std::vector<diagnostics::Probe> probes;
  ParamVector theta;
  if (model_kind == "layered-tanh") {
    const auto sizes = train::layer_sizes(sets->train, pre->hidden);
    auto net = std::make_shared<const models::LayeredTanhEnergyNet>(sizes);
    if (!checkpoint.empty()) {
      theta = train::load_checkpoint(checkpoint).theta;
      net->validate_params(theta);
      log << "sweep: parameters from " << checkpoint << '\n';
    } else {
      log << "sweep: pretraining for " << pre->epochs << " epochs\n";
      theta = train::train(sets->train, sets->test, *pre).final.theta;
    }
    const std::size_t count = std::min(n_probes, sets->train.size());
    for (std::size_t e = 0; e < count; ++e) {
      auto sys = train::example_system(net, sets->train, e);
      auto init = StateVector::continuous(net->make_state(sets->train.input(e)));
      init = sampler::relax_deterministic(sys, theta, 0.0, init, pre->relax.step_size, pre->relax.max_iters,
                                          pre->relax.tol)
                 .state;
      probes.push_back(diagnostics::Probe{std::move(sys), std::move(init)});
    }
  } else {
    auto model = std::make_shared<const models::SpinGlassModel>(n_spins);
    theta = model->random_params(derive_seed(common.seed, {0x5a}), coupling_scale);
    for (std::size_t e = 0; e < n_probes; ++e) {
      const double target = e % 2 == 0 ? 1.0 : -1.0;
      probes.push_back(diagnostics::Probe{
          System{model, models::SpinGlassModel::output_loss(n_spins - 1 - e % n_spins, target)}, std::nullopt});
    }
    if (sc.chain.kernel != sampler::Kernel::GibbsSweepBinary || sc.reference.kernel != sampler::Kernel::GibbsSweepBinary) {
      throw ConfigError("spin-glass sweeps need kernel = gibbs and ref_kernel = gibbs");
    }
  }

  log << "sweep: " << sc.grid.size() << " grid points, " << probes.size() << " probes\n";
  const auto result = diagnostics::alignment_sweep(probes, theta, temp, sc);
  {
    auto out = open_out(common.out / "sweep.csv");
    diagnostics::write_sweep_csv(result, out);
  }

  checks::Report summary;
  std::vector<double> betas, cosines;
  double snr_hi = std::nan(""), snr_lo = std::nan("");
  for (const auto& row : result.rows) {
    betas.push_back(row.beta);
    cosines.push_back(row.vs_supervised.value);
    if (row.beta == 1.0) snr_hi = row.snr;
    if (row.beta == 0.01) snr_lo = row.snr;
    log << "beta=" << row.beta << " cos_sup=" << row.vs_supervised.value << " cos_ref=" << row.vs_reference.value
        << " snr=" << row.snr << '\n';
  }
  if (betas.size() >= 2) {
    const double rho = diagnostics::spearman(betas, cosines);
    summary.rows.push_back({"spearman_cos_supervised", betas.size(), rho, 0.8, rho >= 0.8, "trend over the grid"});
  }
  if (!result.rows.empty() && result.rows.back().beta == 1.0) {
    const double c = result.rows.back().vs_supervised.value;
    summary.rows.push_back({"cos_supervised_at_1", 1, c, 0.3, c >= 0.3, ""});
  }
  if (!std::isnan(snr_hi) && !std::isnan(snr_lo)) {
    const double ratio = snr_lo > 0.0 ? snr_hi / snr_lo : std::numeric_limits<double>::infinity();
    summary.rows.push_back({"snr_ratio_1_vs_0.01", 2, ratio, 10.0, ratio >= 10.0, ""});
  }
  write_summary(common.out / "sweep_summary.csv", summary);
  log_report(log, summary);
  return summary.all_passed() ? kOk : kCheckFailed;
}

int cmd_diagnose(RunConfig& cfg, std::ostream& log) {
  const auto common = read_common(cfg, "diagnose");
  const double fd_step = cfg.get_double("fd_step", 1e-6);
  const double fd_tol = cfg.get_double("fd_tol", 1e-6);
  checks::GibbsTvParams gp;
  gp.seed = derive_seed(common.seed, {1});
  gp.n_samples = cfg.get_size("gibbs_samples", gp.n_samples);
  gp.n_instances = cfg.get_size("gibbs_instances", gp.n_instances);
  gp.n_spins = cfg.get_size("gibbs_spins", gp.n_spins);
  const double tv_tol = cfg.get_double("gibbs_tv_tol", 0.02);
  checks::GaussianParams gauss;
  gauss.seed = derive_seed(common.seed, {2});
  gauss.dim = cfg.get_size("gauss_dim", gauss.dim);
  gauss.n_chains = cfg.get_size("gauss_chains", gauss.n_chains);
  gauss.n_steps = cfg.get_size("gauss_steps", gauss.n_steps);
  finish_setup(cfg, common, "diagnose");

  checks::Report report = checks::run_gradient_checks(common.seed, fd_step, fd_tol);
  report.rows.push_back(checks::gibbs_tv_check(gp, tv_tol));
  report.rows.push_back(checks::gaussian_covariance_check(gauss));
  for (auto& row : checks::acceptance_checks(derive_seed(common.seed, {3})).rows) {
    row.name = "mala_acceptance:" + row.name;
    report.rows.push_back(row);
  }
  write_summary(common.out / "diagnose.csv", report);
  log_report(log, report);
  if (const auto* fail = report.first_failure()) {
    log << "diagnose: first failure: " << fail->name << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int run_command(const std::string& name, RunConfig& cfg, std::ostream& log, const checks::IdentityHooks& hooks) {
  try {
    if (name == "verify") return cmd_verify(cfg, log, hooks);
    if (name == "train") return cmd_train(cfg, log);
    if (name == "sweep") return cmd_sweep(cfg, log);
    if (name == "diagnose") return cmd_diagnose(cfg, log);
    log << "error: unknown command '" << name << "'\n";
    return kUsage;
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace tep::cli
