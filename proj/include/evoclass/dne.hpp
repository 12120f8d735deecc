#pragma once

#include <cstdint>
#include <vector>

#include "evoclass/data.hpp"
#include "evoclass/model.hpp"

namespace evoclass {

struct DneConfig {
  int population = 50;  // even, so "best 50%" is exact
  float sigma = 0.02f;
  float eta = 1.0f;
  int generations = 400;
  uint64_t master_seed = 0;
  int eval_test_every = 1;
  int workers = 1;

  void validate() const;
};

struct GenerationRecord {
  int generation = 0;
  int train_correct = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;  // most recent evaluation
  double elapsed_seconds = 0.0;
};

struct GenerationState {
  int generation = 0;
  ModelParams parent;
  std::vector<GenerationRecord> history;
};

// Child seeds are counter-derived from (master_seed, generation, index):
// no shared sequential stream, so results are byte-identical for any
// worker count.
uint64_t dne_child_seed(uint64_t master_seed, int generation, int child_index);

// perturbation = sigma * eps, eps ~ iid standard normal, fully determined
// by child_seed. Label data never enters.
std::vector<float> mutate(const ModelParams& parent, float sigma, uint64_t child_seed);

// Fitness is the integer count of correctly predicted training samples.
int evaluate_fitness(const ModelParams& params, const std::vector<LabeledSample>& train);

// One generation: derive N child seeds, score N perturbed children, keep
// the N/2 fittest (ties to the lower index), and fold the mean of their
// perturbations into the parent scaled by eta.
void evolve_generation(GenerationState& state, const DneConfig& cfg,
                       const std::vector<LabeledSample>& train);

struct DneResult {
  ModelParams params;
  std::vector<GenerationRecord> history;
};

DneResult train_dne(const DneConfig& cfg, ModelParams initial,
                    const std::vector<LabeledSample>& train,
                    const std::vector<LabeledSample>& test);

void write_dne_history_csv(const std::vector<GenerationRecord>& history,
                           const std::filesystem::path& path);

}  // namespace evoclass
