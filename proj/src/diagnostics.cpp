#include "tep/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "tep/estimators.hpp"
#include "tep/oracle.hpp"
#include "tep/rng.hpp"

namespace tep::diagnostics {

namespace {

constexpr std::uint64_t kEstimateStream = 0xa1;
constexpr std::uint64_t kReferenceStream = 0xa2;
constexpr std::uint64_t kSupervisedStream = 0xa3;
constexpr std::uint64_t kSnrStream = 0xa4;

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

bool enumerable(std::span<const Probe> probes) {
  const oracle::Limits limits;
  return std::all_of(probes.begin(), probes.end(), [&](const Probe& p) {
    return p.sys.energy().state_kind() == StateKind::Binary &&
           p.sys.energy().state_dim() <= limits.n_max;
  });
}

void add_scaled(std::vector<double>& acc, std::span<const double> v, double w) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
}

// Mean over probes of a per-probe vector computed in parallel and summed in probe order.
template <typename Fn>
std::vector<double> probe_mean(std::size_t n_probes, std::size_t dim, Exec exec, Fn per_probe) {
  std::vector<std::vector<double>> parts(n_probes);
  detail::for_each_index(n_probes, exec, [&](std::size_t e) { parts[e] = per_probe(e); });
  std::vector<double> mean(dim, 0.0);
  for (const auto& part : parts) add_scaled(mean, part, 1.0 / static_cast<double>(n_probes));
  return mean;
}

std::vector<double> phase_mean(const Probe& probe, const ParamVector& theta, double beta,
                               Temperature temp, const SnrConfig& cfg, std::uint64_t seed) {
  if (cfg.deterministic) {
    const auto init = probe.init ? *probe.init
                                 : StateVector(std::vector<double>(probe.sys.energy().state_dim(), 0.0),
                                               probe.sys.energy().state_kind());
    const auto r = sampler::relax_deterministic(probe.sys, theta, beta, init, cfg.relax_step,
                                                cfg.relax_iters, cfg.relax_tol);
    return std::vector<double>(r.state.values().begin(), r.state.values().end());
  }
  auto chain = cfg.chain;
  chain.seed = seed;
  return sampler::run_chains(probe.sys, theta, beta, temp, chain, probe.init, Exec::Serial).mean_state();
}

}  // namespace

Cosine cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw InputError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  }
  const double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) return Cosine{0.0, true};
  return Cosine{std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0), false};
}

Cosine cosine(const ParamVector& u, const ParamVector& v) { return cosine(u.values(), v.values()); }

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman: length mismatch");
  if (x.size() < 2) throw InputError("spearman: needs at least two points");
  const auto rx = ranks(x), ry = ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

const char* snr_mode_name(SnrMode m) { return m == SnrMode::RunNorm ? "run-norm" : "per-unit"; }

SnrMode parse_snr_mode(const std::string& name) {
  if (name == "run-norm") return SnrMode::RunNorm;
  if (name == "per-unit") return SnrMode::PerUnit;
  throw InputError("unknown SNR mode '" + name + "' (expected run-norm or per-unit)");
}

double snr_noise_floor(std::size_t repeats) {
  if (repeats < 2) throw InputError("snr: at least 2 repeats are required");
  return 1.0 / std::sqrt(static_cast<double>(repeats));
}

double snr_of_perturbation(std::span<const Probe> probes, const ParamVector& theta, double beta,
                           Temperature temp, const SnrConfig& cfg, Exec exec) {
  if (cfg.repeats < 2) throw InputError("snr: at least 2 repeats are required, got " + std::to_string(cfg.repeats));
  if (probes.empty()) throw InputError("snr: no probes");
  const NudgeStrength nudge(beta);
  if (!cfg.deterministic) cfg.chain.validate();

  // Free coordinates of every probe, concatenated.
  std::vector<std::size_t> offsets{0};
  std::vector<bool> free;
  for (const auto& p : probes) {
    const auto mask = p.sys.energy().clamp_mask();
    for (bool clamped : mask) free.push_back(!clamped);
    offsets.push_back(free.size());
  }
  const std::size_t dim = free.size();
  const std::size_t r_count = cfg.repeats;
  const std::size_t n_probes = probes.size();

  std::vector<std::vector<double>> delta(r_count, std::vector<double>(dim, 0.0));
  detail::for_each_index(r_count * n_probes, exec, [&](std::size_t job) {
    const std::size_t r = job / n_probes, e = job % n_probes;
    const auto m0 = phase_mean(probes[e], theta, 0.0, temp, cfg, derive_seed(cfg.chain.seed, {kSnrStream, r, e, 0}));
    const auto mb = phase_mean(probes[e], theta, nudge.value(), temp, cfg,
                               derive_seed(cfg.chain.seed, {kSnrStream, r, e, 1}));
    for (std::size_t i = 0; i < m0.size(); ++i) delta[r][offsets[e] + i] = mb[i] - m0[i];
  });

  std::vector<double> mean(dim, 0.0);
  for (const auto& d : delta) add_scaled(mean, d, 1.0 / static_cast<double>(r_count));
  // Averaging identical runs need not reproduce them exactly, so the
  // noiseless case is detected directly.
  const bool identical = std::all_of(delta.begin(), delta.end(), [&](const auto& d) { return d == delta[0]; });
  if (identical) mean = delta[0];

  if (cfg.mode == SnrMode::RunNorm) {
    double resid = 0.0;
    std::vector<double> diff(dim);
    for (const auto& d : delta) {
      for (std::size_t i = 0; i < dim; ++i) diff[i] = d[i] - mean[i];
      resid += norm2(diff);
    }
    resid /= static_cast<double>(r_count);
    const double signal = norm2(mean);
    if (resid == 0.0) return signal > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return signal / resid;
  }

  double total = 0.0;
  std::size_t units = 0;
  bool any_infinite = false;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!free[i]) continue;
    double resid = 0.0;
    for (const auto& d : delta) resid += std::abs(d[i] - mean[i]);
    resid /= static_cast<double>(r_count);
    const double signal = std::abs(mean[i]);
    ++units;
    if (resid == 0.0) {
      any_infinite = any_infinite || signal > 0.0;
      continue;
    }
    total += signal / resid;
  }
  if (any_infinite) return std::numeric_limits<double>::infinity();
  return units == 0 ? 0.0 : total / static_cast<double>(units);
}

void SweepConfig::validate() const {
  if (grid.empty()) throw InputError("sweep: empty β grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) {
      throw InputError("sweep: grid values must lie in (0, 1], got " + std::to_string(grid[i]));
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("sweep: grid must be strictly increasing");
  }
  chain.validate();
  reference.validate();
  if (snr.repeats < 2) throw InputError("sweep: SNR needs at least 2 repeats");
}

SweepResult alignment_sweep(std::span<const Probe> probes, const ParamVector& theta,
                            Temperature temp, const SweepConfig& cfg, Exec exec) {
  cfg.validate();
  if (probes.empty()) throw InputError("sweep: no probes");
  const std::size_t p = theta.size();
  const std::size_t n_probes = probes.size();
  for (const auto& probe : probes) probe.sys.energy().validate_params(theta);

  SweepResult result;
  result.grid = cfg.grid;
  result.reference_exact = enumerable(probes);

  const auto supervised = probe_mean(n_probes, p, exec, [&](std::size_t e) {
    if (result.reference_exact) {
      const auto g = oracle::exact_grad_supervised(probes[e].sys, theta, temp);
      return std::vector<double>(g.values().begin(), g.values().end());
    }
    auto ref = cfg.reference;
    ref.seed = derive_seed(cfg.seed, {kSupervisedStream, e});
    const auto g = estimators::grad_supervised_mc(probes[e].sys, theta, temp, ref, probes[e].init, Exec::Serial);
    return std::vector<double>(g.grad.values().begin(), g.grad.values().end());
  });

  SnrConfig snr = cfg.snr;
  snr.chain = cfg.chain;

  for (std::size_t b = 0; b < cfg.grid.size(); ++b) {
    const double beta = cfg.grid[b];
    SweepRow row;
    row.beta = beta;
    row.seed = derive_seed(cfg.seed, {kEstimateStream, b});
    row.samples_per_phase = cfg.chain.n_chains * cfg.chain.kept_per_chain() * n_probes;

    const auto estimate = probe_mean(n_probes, p, exec, [&](std::size_t e) {
      auto chain = cfg.chain;
      chain.seed = derive_seed(row.seed, {e});
      const auto g = estimators::grad_classical_ep(probes[e].sys, theta, temp, beta, chain, probes[e].init,
                                                   Exec::Serial);
      return std::vector<double>(g.grad.values().begin(), g.grad.values().end());
    });
    const auto reference = probe_mean(n_probes, p, exec, [&](std::size_t e) {
      if (result.reference_exact) {
        const auto g = oracle::exact_grad_J_beta(probes[e].sys, theta, NudgeStrength(beta), temp);
        return std::vector<double>(g.values().begin(), g.values().end());
      }
      auto ref = cfg.reference;
      ref.seed = derive_seed(cfg.seed, {kReferenceStream, b, e});
      // β ĝ(β) at the reference budget is 𝔼_β[∇_θE] − 𝔼_0[∇_θE].
      const auto g = estimators::grad_classical_ep(probes[e].sys, theta, temp, beta, ref, probes[e].init,
                                                   Exec::Serial);
      std::vector<double> v(g.grad.values().begin(), g.grad.values().end());
      for (double& x : v) x *= beta;
      return v;
    });

    row.vs_supervised = cosine(estimate, supervised);
    row.vs_reference = cosine(estimate, reference);
    snr.chain.seed = derive_seed(cfg.seed, {kSnrStream, b});
    row.snr = snr_of_perturbation(probes, theta, beta, temp, snr, exec);
    result.rows.push_back(row);
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "beta,metric,value,degenerate,samples_per_phase,seed\n";
  const auto flags = out.flags();
  out << std::setprecision(17);
  for (const auto& row : result.rows) {
    auto line = [&](const char* metric, double value, bool degenerate) {
      out << row.beta << ',' << metric << ',';
      if (std::isinf(value)) {
        out << (value > 0 ? "inf" : "-inf");
      } else {
        out << value;
      }
      out << ',' << (degenerate ? 1 : 0) << ',' << row.samples_per_phase << ',' << row.seed << '\n';
    };
    line("cos_supervised", row.vs_supervised.value, row.vs_supervised.degenerate);
    line("cos_reference", row.vs_reference.value, row.vs_reference.degenerate);
    line("snr", row.snr, false);
  }
  out.flags(flags);
}

}  // namespace tep::diagnostics
