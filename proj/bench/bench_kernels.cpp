// Serial reference vs OpenMP kernels. Each benchmark takes the execution mode
// as its first argument (0 = serial, 1 = parallel).

#include <benchmark/benchmark.h>

#include "tep/data.hpp"
#include "tep/estimators.hpp"
#include "tep/models.hpp"
#include "tep/oracle.hpp"
#include "tep/sampler.hpp"
#include "tep/train.hpp"

using namespace tep;

namespace {

Exec mode(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void BM_Enumeration(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  auto model = std::make_shared<models::SpinGlassModel>(n);
  const System sys{model, models::SpinGlassModel::output_loss(0, 1.0)};
  const auto theta = model->random_params(1);
  for (auto _ : state) {
    const auto table = oracle::gibbs_table(sys, theta, NudgeStrength(0.5), Temperature(1.0), mode(state));
    benchmark::DoNotOptimize(oracle::loss_grad_covariance(table, sys, theta, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * (std::int64_t{1} << n));
}
BENCHMARK(BM_Enumeration)->ArgsProduct({{0, 1}, {10, 14}})->Unit(benchmark::kMillisecond);

void BM_Chains(benchmark::State& state) {
  auto net = std::make_shared<models::LayeredTanhEnergyNet>(models::LayerSizes{784, 64, 10});
  const auto theta = net->init_params(1);
  std::vector<double> x(784, 0.3);
  const System sys{net, net->loss_for_example(models::one_hot(3, 10))};
  const auto init = StateVector::continuous(net->make_state(x));
  sampler::ChainConfig c;
  c.n_chains = static_cast<std::size_t>(state.range(1));
  c.n_steps = 50;
  c.burn_in = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler::run_chains(sys, theta, 0.5, Temperature(0.01), c, init, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1) * 50);
}
BENCHMARK(BM_Chains)->ArgsProduct({{0, 1}, {4, 16}})->Unit(benchmark::kMillisecond);

void BM_Minibatch(benchmark::State& state) {
  const auto ds = data::make_blobs(10, 2, 784, 0.25, 1);
  auto net = std::make_shared<const models::LayeredTanhEnergyNet>(train::layer_sizes(ds, 64));
  const auto theta = net->init_params(1);
  sampler::ChainConfig c;
  c.n_chains = 4;
  c.n_steps = 50;
  c.burn_in = 10;
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    std::vector<estimators::GradEstimate> parts(batch);
    // Per-example estimates, fanned out over the batch the way training does.
    auto one = [&](std::size_t k) {
      const auto sys = train::example_system(net, ds, k % ds.size());
      auto cc = c;
      cc.seed = k;
      parts[k] = estimators::grad_classical_ep(sys, theta, Temperature(0.01), 1.0, cc,
                                               StateVector::continuous(net->make_state(ds.input(k % ds.size()))),
                                               Exec::Serial);
    };
    if (mode(state) == Exec::Serial) {
      for (std::size_t k = 0; k < batch; ++k) one(k);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(batch); ++k) one(static_cast<std::size_t>(k));
    }
    benchmark::DoNotOptimize(estimators::average(parts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Minibatch)->ArgsProduct({{0, 1}, {8}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
