#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "evoclass/data.hpp"
#include "evoclass/model.hpp"

namespace evoclass {

struct PlateauConfig {
  double factor = 0.1;
  int patience = 10;
  double min_lr = 1e-7;
  double threshold = 1e-8;  // absolute improvement needed to reset
};

struct SgdConfig {
  enum class Optimizer { sgd, adam };
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  PlateauConfig plateau;
  uint64_t shuffle_seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  int64_t t = 0;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  explicit AdamState(size_t n) : m(n, 0.0f), v(n, 0.0f) {}
};

// params' = params - lr * grads
void sgd_step(std::span<float> params, std::span<const float> grads, double lr);

// Standard Adam with bias correction; t increments per call.
void adam_step(std::span<float> params, std::span<const float> grads,
               AdamState& state, double lr);

// Monitors a loss; after `patience` consecutive epochs without an
// improvement of at least `threshold`, multiplies lr by `factor`
// (floored at min_lr) and resets the counter.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const PlateauConfig& cfg) : cfg_(cfg) {}
  double step(double monitored, double lr);

 private:
  PlateauConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

// Replays a full monitored history through the scheduler and returns the
// resulting learning rate.
double reduce_lr_on_plateau(const std::vector<double>& monitor_history,
                            const PlateauConfig& cfg, double initial_lr);

// Per-sample loss and gradient of the full model; the gradient is
// accumulated into grad_accum (caller zeroes per batch).
struct TrainWorkspace;
float model_loss_grad(const ModelParams& params, const float* image, int label,
                      TrainWorkspace& ws, std::span<float> grad_accum);

struct TrainWorkspace {
  std::vector<std::vector<float>> act;  // post-activation per stage
  std::vector<std::vector<float>> pre;  // pre-activation per stage
  std::vector<float> grad_a;
  std::vector<float> grad_b;
  std::vector<float> wscratch;  // per-layer weight grad before accumulation
  std::vector<float> bscratch;
  void ensure(const ArchitectureConfig& cfg);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;
};

struct SgdResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

// Per epoch: seeded shuffle, batches (last partial batch kept), mean
// batch gradient, optimizer step, plateau rule on epoch train loss.
SgdResult train_sgd(const SgdConfig& cfg, ModelParams initial,
                    const std::vector<LabeledSample>& train,
                    const std::vector<LabeledSample>& test);

void write_sgd_history_csv(const std::vector<EpochRecord>& history,
                           const std::filesystem::path& path);

}  // namespace evoclass
