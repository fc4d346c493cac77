#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tep/core.hpp"
#include "tep/data.hpp"
#include "tep/models.hpp"
#include "tep/quadrature.hpp"
#include "tep/sampler.hpp"

namespace tep::train {

class TrainingError : public Error {
 public:
  using Error::Error;
};

enum class TrainMethod { Backprop, EP, PathIntegral };

const char* method_name(TrainMethod m);
TrainMethod parse_method(const std::string& name);

struct RelaxOptions {
  double step_size = 0.5;
  std::size_t max_iters = 200;
  double tol = 1e-6;
};

struct TrainConfig {
  TrainMethod method = TrainMethod::EP;
  double beta = 1.0;                 // EP nudging strength
  QuadratureSpec quad = QuadratureSpec::trapezoid(3);  // path-integral nodes
  sampler::ChainConfig chain;        // per example and phase; seed is derived per example
  double temperature = 1.0;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 20;
  std::size_t epochs = 30;
  std::size_t eval_every = 1;
  std::size_t eval_train_limit = 0;  // 0 evaluates every training example
  std::size_t hidden = 64;
  std::uint64_t seed = 1;
  bool warm_start = true;            // start chains at the deterministic free fixed point
  RelaxOptions relax;

  void validate() const;
  // Canonical key=value rendering; its hash is the checkpoint fingerprint.
  std::string describe() const;
  std::uint64_t fingerprint() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double mean_j = 0.0;  // NaN for backprop
  bool operator==(const EpochMetrics&) const = default;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  ParamVector theta;
  std::vector<double> velocity;
  std::size_t epoch = 0;  // epochs completed
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;
  std::vector<EpochMetrics> metrics;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  Checkpoint final;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Checkpoint&)>;

models::LayerSizes layer_sizes(const data::Dataset& ds, std::size_t hidden);

/// SGD with momentum on the chosen gradient estimator. The run is a pure
/// function of (datasets, cfg); resuming from a checkpoint of the same run
/// reproduces the uninterrupted trajectory exactly.
TrainResult train(const data::Dataset& train_set, const data::Dataset& test_set,
                  const TrainConfig& cfg, const std::optional<Checkpoint>& resume = std::nullopt,
                  const EpochCallback& on_epoch = {}, std::size_t stop_after_epoch = 0);

/// Fraction of examples whose argmax output after deterministic β = 0
/// relaxation matches the label.
double evaluate(const models::LayeredTanhEnergyNet& net, const ParamVector& theta,
                const data::Dataset& ds, const RelaxOptions& relax = {}, Exec exec = Exec::Parallel);

std::size_t predict(const models::LayeredTanhEnergyNet& net, const ParamVector& theta,
                    std::span<const double> x, const RelaxOptions& relax = {});

double evaluate_baseline(const models::FeedforwardBaseline& net, const ParamVector& theta,
                         const data::Dataset& ds);

/// Per-example nudged systems for a dataset slice.
System example_system(const std::shared_ptr<const models::LayeredTanhEnergyNet>& net,
                      const data::Dataset& ds, std::size_t index);

}  // namespace tep::train
