#include "tep/train.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "tep/estimators.hpp"
#include "tep/rng.hpp"

namespace tep::train {

namespace {

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& token, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw InputError("checkpoint: bad number in " + where);
  return v;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ExampleGrad {
  std::vector<double> grad;
  double j_estimate = 0.0;
};

}  // namespace

const char* method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::Backprop: return "backprop";
    case TrainMethod::EP: return "ep";
    case TrainMethod::PathIntegral: return "path";
  }
  return "?";
}

TrainMethod parse_method(const std::string& name) {
  if (name == "backprop") return TrainMethod::Backprop;
  if (name == "ep") return TrainMethod::EP;
  if (name == "path") return TrainMethod::PathIntegral;
  throw InputError("unknown training method '" + name + "' (expected backprop, ep or path)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InputError("train: learning rate must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("train: momentum must lie in [0, 1)");
  if (batch_size == 0) throw InputError("train: minibatch size must be at least 1");
  if (hidden == 0) throw InputError("train: hidden layer size must be positive");
  if (eval_every == 0) throw InputError("train: eval_every must be positive");
  if (method == TrainMethod::EP && !(beta > 0.0 && beta <= 1.0)) {
    throw InputError("train: EP nudging strength must lie in (0, 1]");
  }
  if (method == TrainMethod::PathIntegral) quad.validate();
  if (method != TrainMethod::Backprop) chain.validate();
  Temperature{temperature};
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "method=" << method_name(method) << "\n"
     << "beta=" << hexfloat(beta) << "\n"
     << "quad_scheme=" << (quad.scheme == QuadratureScheme::Trapezoid ? "trapezoid" : "gauss") << "\n"
     << "quad_nodes=" << quad.size() << "\n"
     << "kernel=" << sampler::kernel_name(chain.kernel) << "\n"
     << "chains=" << chain.n_chains << "\n"
     << "steps=" << chain.n_steps << "\n"
     << "burn_in=" << chain.burn_in << "\n"
     << "thin=" << chain.thin << "\n"
     << "step_size=" << hexfloat(chain.step_size) << "\n"
     << "temperature=" << hexfloat(temperature) << "\n"
     << "lr=" << hexfloat(learning_rate) << "\n"
     << "momentum=" << hexfloat(momentum) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "hidden=" << hidden << "\n"
     << "seed=" << seed << "\n"
     << "warm_start=" << warm_start << "\n"
     << "relax=" << hexfloat(relax.step_size) << "," << relax.max_iters << "," << hexfloat(relax.tol) << "\n";
  return os.str();
}

std::uint64_t TrainConfig::fingerprint() const { return fnv1a(describe()); }

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out << "tep-checkpoint " << ckpt.version << "\n";
  out << "fingerprint " << ckpt.fingerprint << "\n";
  out << "seed " << ckpt.seed << "\n";
  out << "epoch " << ckpt.epoch << "\n";
  out << "layout " << ckpt.theta.layout().size() << "\n";
  for (const auto& seg : ckpt.theta.layout()) {
    out << seg.name << " " << seg.offset << " " << seg.length << "\n";
  }
  out << "theta " << ckpt.theta.size() << "\n";
  for (double v : ckpt.theta.values()) out << hexfloat(v) << "\n";
  out << "velocity " << ckpt.velocity.size() << "\n";
  for (double v : ckpt.velocity) out << hexfloat(v) << "\n";
  out << "metrics " << ckpt.metrics.size() << "\n";
  for (const auto& m : ckpt.metrics) {
    out << m.epoch << " " << hexfloat(m.train_acc) << " " << hexfloat(m.test_acc) << " "
        << hexfloat(m.mean_j) << "\n";
  }
  out << "end\n";
  if (!out) throw InputError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  auto expect = [&](const std::string& key) {
    std::string got;
    if (!(in >> got) || got != key) throw InputError("checkpoint: expected '" + key + "', got '" + got + "'");
  };
  auto read_num = [&](const std::string& where) {
    std::string tok;
    if (!(in >> tok)) throw InputError("checkpoint: truncated at " + where);
    return parse_double(tok, where);
  };
  Checkpoint c;
  expect("tep-checkpoint");
  if (!(in >> c.version)) throw InputError("checkpoint: missing version");
  if (c.version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(c.version));
  }
  expect("fingerprint");
  in >> c.fingerprint;
  expect("seed");
  in >> c.seed;
  expect("epoch");
  in >> c.epoch;
  expect("layout");
  std::size_t n_seg = 0;
  in >> n_seg;
  std::vector<Segment> layout(n_seg);
  for (auto& seg : layout) in >> seg.name >> seg.offset >> seg.length;
  expect("theta");
  std::size_t p = 0;
  in >> p;
  std::vector<double> values(p);
  for (auto& v : values) v = read_num("theta");
  c.theta = ParamVector(std::move(values), std::move(layout));
  expect("velocity");
  std::size_t nv = 0;
  in >> nv;
  c.velocity.resize(nv);
  for (auto& v : c.velocity) v = read_num("velocity");
  expect("metrics");
  std::size_t nm = 0;
  in >> nm;
  c.metrics.resize(nm);
  for (auto& m : c.metrics) {
    in >> m.epoch;
    m.train_acc = read_num("metrics");
    m.test_acc = read_num("metrics");
    m.mean_j = read_num("metrics");
  }
  expect("end");
  return c;
}

models::LayerSizes layer_sizes(const data::Dataset& ds, std::size_t hidden) {
  return models::LayerSizes{ds.dim, hidden, ds.n_classes};
}

System example_system(const std::shared_ptr<const models::LayeredTanhEnergyNet>& net,
                      const data::Dataset& ds, std::size_t index) {
  const auto target = models::one_hot(ds.labels[index], ds.n_classes);
  return System{net, net->loss_for_example(target)};
}

std::size_t predict(const models::LayeredTanhEnergyNet& net, const ParamVector& theta,
                    std::span<const double> x, const RelaxOptions& relax) {
  // The loss is irrelevant at β = 0.
  const System sys{std::shared_ptr<const EnergyModel>(&net, [](const EnergyModel*) {}), Loss::zero()};
  const auto r = sampler::relax_deterministic(sys, theta, 0.0, StateVector::continuous(net.make_state(x)),
                                              relax.step_size, relax.max_iters, relax.tol);
  const auto s = r.state.values().subspan(net.output_offset(), net.sizes().n_out);
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

double evaluate(const models::LayeredTanhEnergyNet& net, const ParamVector& theta,
                const data::Dataset& ds, const RelaxOptions& relax, Exec exec) {
  if (ds.dim != net.sizes().n_in) throw InputError("evaluate: dataset dimension does not match the model");
  std::vector<unsigned char> hit(ds.size(), 0);
  detail::for_each_index(ds.size(), exec, [&](std::size_t i) {
    hit[i] = predict(net, theta, ds.input(i), relax) == ds.labels[i];
  });
  const auto correct = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double evaluate_baseline(const models::FeedforwardBaseline& net, const ParamVector& theta,
                         const data::Dataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += net.predict(theta, ds.input(i)) == ds.labels[i];
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train(const data::Dataset& train_set, const data::Dataset& test_set,
                  const TrainConfig& cfg, const std::optional<Checkpoint>& resume,
                  const EpochCallback& on_epoch, std::size_t stop_after_epoch) {
  cfg.validate();
  train_set.validate();
  test_set.validate();
  if (test_set.dim != train_set.dim || test_set.n_classes != train_set.n_classes) {
    throw InputError("train: train and test sets disagree in shape");
  }
  const auto sizes = layer_sizes(train_set, cfg.hidden);
  const auto net = std::make_shared<const models::LayeredTanhEnergyNet>(sizes);
  const models::FeedforwardBaseline baseline(sizes);
  const Temperature temp(cfg.temperature);

  Checkpoint state;
  state.seed = cfg.seed;
  state.fingerprint = cfg.fingerprint();
  if (resume) {
    if (resume->fingerprint != state.fingerprint) {
      throw InputError("train: checkpoint was written by a different configuration");
    }
    if (resume->theta.size() != net->param_dim()) throw InputError("train: checkpoint shape mismatch");
    state = *resume;
  } else {
    state.theta = net->init_params(derive_seed(cfg.seed, {0x1417}));
    state.velocity.assign(net->param_dim(), 0.0);
  }

  const std::size_t p = net->param_dim();
  const std::size_t n_train = train_set.size();
  const data::Dataset eval_train =
      cfg.eval_train_limit > 0 ? train_set.head(cfg.eval_train_limit) : train_set;

  auto example_grad = [&](const ParamVector& theta, std::size_t index, std::uint64_t seed) {
    ExampleGrad out;
    if (cfg.method == TrainMethod::Backprop) {
      const auto target = models::one_hot(train_set.labels[index], train_set.n_classes);
      const auto g = baseline.backprop_grad(theta, train_set.input(index), target);
      out.grad.assign(g.values().begin(), g.values().end());
      out.j_estimate = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    const System sys = example_system(net, train_set, index);
    auto init = StateVector::continuous(net->make_state(train_set.input(index)));
    if (cfg.warm_start) {
      init = sampler::relax_deterministic(sys, theta, 0.0, init, cfg.relax.step_size,
                                          cfg.relax.max_iters, cfg.relax.tol)
                 .state;
    }
    auto chain = cfg.chain;
    chain.seed = seed;
    estimators::MonteCarloSource src(sys, theta, temp, chain, init, Exec::Serial);
    estimators::GradEstimate est;
    if (cfg.method == TrainMethod::EP) {
      est = estimators::classical_ep(src, theta, cfg.beta);
      // Trapezoid on {0, β}: A(θ, β) − A(θ, 0) ≈ β (ℓ̄_0 + ℓ̄_β) / 2.
      out.j_estimate = cfg.beta * 0.5 * (est.meta.mean_losses[0] + est.meta.mean_losses[1]);
    } else {
      est = estimators::covariance(src, theta, temp, cfg.quad, estimators::Method::PathIntegral);
      out.j_estimate = 0.0;
      for (std::size_t k = 0; k < cfg.quad.size(); ++k) {
        out.j_estimate += cfg.quad.weights[k] * est.meta.mean_losses[k];
      }
    }
    out.grad.assign(est.grad.values().begin(), est.grad.values().end());
    return out;
  };

  TrainResult result;
  result.metrics = state.metrics;
  const std::size_t last_epoch = stop_after_epoch > 0 ? std::min(stop_after_epoch, cfg.epochs) : cfg.epochs;
  for (std::size_t epoch = state.epoch + 1; epoch <= last_epoch; ++epoch) {
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {epoch, 0x5u}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double j_sum = 0.0;
    const std::size_t n_batches = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n_train, lo + cfg.batch_size);
      std::vector<ExampleGrad> parts(hi - lo);
      try {
        detail::for_each_index(hi - lo, Exec::Parallel, [&](std::size_t k) {
          parts[k] = example_grad(state.theta, order[lo + k], derive_seed(cfg.seed, {epoch, b, k}));
        });
      } catch (const std::exception& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " +
                            e.what());
      }
      std::vector<double> g(p, 0.0);
      for (const auto& part : parts) {
        for (std::size_t i = 0; i < p; ++i) g[i] += part.grad[i];
        j_sum += part.j_estimate;
      }
      const double inv = 1.0 / static_cast<double>(parts.size());
      std::vector<double> theta(state.theta.values().begin(), state.theta.values().end());
      for (std::size_t i = 0; i < p; ++i) {
        state.velocity[i] = cfg.momentum * state.velocity[i] + g[i] * inv;
        theta[i] -= cfg.learning_rate * state.velocity[i];
      }
      try {
        state.theta = state.theta.with_values(std::move(theta));
      } catch (const InputError&) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                            ": parameters became non-finite");
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_j = j_sum / static_cast<double>(n_train);
    const bool eval_now = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
    if (eval_now) {
      if (cfg.method == TrainMethod::Backprop) {
        m.train_acc = evaluate_baseline(baseline, state.theta, eval_train);
        m.test_acc = evaluate_baseline(baseline, state.theta, test_set);
      } else {
        m.train_acc = evaluate(*net, state.theta, eval_train, cfg.relax);
        m.test_acc = evaluate(*net, state.theta, test_set, cfg.relax);
      }
    } else {
      m.train_acc = m.test_acc = std::numeric_limits<double>::quiet_NaN();
    }
    state.epoch = epoch;
    state.metrics.push_back(m);
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m, state);
  }
  result.final = std::move(state);
  return result;
}

}  // namespace tep::train
