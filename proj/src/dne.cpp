#include "evoclass/dne.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evoclass/errors.hpp"
#include "evoclass/rng.hpp"

namespace evoclass {

void DneConfig::validate() const {
  if (population < 2 || population % 2 != 0)
    throw ArgumentError("population must be an even integer >= 2");
  if (!(sigma > 0.0f)) throw ArgumentError("sigma must be > 0");
  if (!(eta > 0.0f)) throw ArgumentError("eta must be > 0");
  if (generations < 1) throw ArgumentError("generations must be >= 1");
  if (eval_test_every < 1) throw ArgumentError("eval_test_every must be >= 1");
  if (workers < 1) throw ArgumentError("workers must be >= 1");
}

uint64_t dne_child_seed(uint64_t master_seed, int generation, int child_index) {
  return derive(derive(derive(master_seed, "dne-child"),
                       static_cast<uint64_t>(generation)),
                static_cast<uint64_t>(child_index));
}

namespace {

void fill_perturbation(float* out, size_t n, float sigma, uint64_t child_seed) {
  Rng rng(child_seed);
  for (size_t i = 0; i < n; ++i) out[i] = sigma * rng.gaussian();
}

int count_correct(const ModelParams& params, const std::vector<LabeledSample>& samples,
                  Workspace& ws) {
  int correct = 0;
  for (const LabeledSample& s : samples)
    if (predict(params, s.image.ptr(), ws) == static_cast<int>(s.label)) ++correct;
  return correct;
}

// Scratch reused across generations; one lane per worker thread.
struct EvolveScratch {
  std::vector<std::vector<float>> delta;   // per worker
  std::vector<ModelParams> child;          // per worker
  std::vector<Workspace> ws;               // per worker
  std::vector<float> update;

  void ensure(const ModelParams& parent, int workers) {
    const size_t n = parent.flat().size();
    if (static_cast<int>(delta.size()) != workers) {
      delta.assign(static_cast<size_t>(workers), std::vector<float>(n));
      child.assign(static_cast<size_t>(workers), parent);
      ws.assign(static_cast<size_t>(workers), Workspace{});
    }
    update.assign(n, 0.0f);
  }
};

void evolve_generation_impl(GenerationState& state, const DneConfig& cfg,
                            const std::vector<LabeledSample>& train,
                            EvolveScratch& scratch) {
  if (train.empty()) throw ArgumentError("evolve_generation: empty training set");
  const int n = cfg.population;
  const size_t plen = state.parent.flat().size();
  scratch.ensure(state.parent, cfg.workers);

  std::vector<int> fitness(static_cast<size_t>(n));

#pragma omp parallel for schedule(static) num_threads(cfg.workers)
  for (int i = 0; i < n; ++i) {
    int lane = 0;
#ifdef _OPENMP
    lane = omp_get_thread_num();
#endif
    std::vector<float>& delta = scratch.delta[static_cast<size_t>(lane)];
    ModelParams& child = scratch.child[static_cast<size_t>(lane)];
    fill_perturbation(delta.data(), plen, cfg.sigma,
                      dne_child_seed(cfg.master_seed, state.generation, i));
    const auto parent = state.parent.flat();
    auto cflat = child.flat();
    for (size_t j = 0; j < plen; ++j) cflat[j] = parent[j] + delta[j];
    fitness[static_cast<size_t>(i)] =
        count_correct(child, train, scratch.ws[static_cast<size_t>(lane)]);
  }

  // truncation selection: top half by fitness, ties to the lower index
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (fitness[static_cast<size_t>(a)] != fitness[static_cast<size_t>(b)])
      return fitness[static_cast<size_t>(a)] > fitness[static_cast<size_t>(b)];
    return a < b;
  });
  const int keep = n / 2;
  std::vector<int> selected(order.begin(), order.begin() + keep);
  std::sort(selected.begin(), selected.end());

  // mean of the selected perturbations, accumulated in ascending child
  // order so the reduction is byte-stable
  std::vector<float>& delta = scratch.delta[0];
  for (int idx : selected) {
    fill_perturbation(delta.data(), plen, cfg.sigma,
                      dne_child_seed(cfg.master_seed, state.generation, idx));
    for (size_t j = 0; j < plen; ++j) scratch.update[j] += delta[j];
  }
  const float inv_keep = 1.0f / static_cast<float>(keep);
  auto parent = state.parent.flat();
  for (size_t j = 0; j < plen; ++j)
    parent[j] += cfg.eta * (scratch.update[j] * inv_keep);

  ++state.generation;
}

}  // namespace

std::vector<float> mutate(const ModelParams& parent, float sigma, uint64_t child_seed) {
  if (sigma < 0.0f) throw ArgumentError("mutate: sigma must be >= 0");
  std::vector<float> delta(parent.flat().size());
  fill_perturbation(delta.data(), delta.size(), sigma, child_seed);
  return delta;
}

int evaluate_fitness(const ModelParams& params, const std::vector<LabeledSample>& train) {
  if (train.empty()) throw ArgumentError("evaluate_fitness: empty sample set");
  thread_local Workspace ws;
  return count_correct(params, train, ws);
}

void evolve_generation(GenerationState& state, const DneConfig& cfg,
                       const std::vector<LabeledSample>& train) {
  // structural requirements only; sigma 0 is a legal degenerate case here
  if (cfg.population < 2 || cfg.population % 2 != 0)
    throw ArgumentError("population must be an even integer >= 2");
  if (cfg.sigma < 0.0f) throw ArgumentError("sigma must be >= 0");
  if (cfg.workers < 1) throw ArgumentError("workers must be >= 1");
  EvolveScratch scratch;
  evolve_generation_impl(state, cfg, train, scratch);
}

DneResult train_dne(const DneConfig& cfg, ModelParams initial,
                    const std::vector<LabeledSample>& train,
                    const std::vector<LabeledSample>& test) {
  cfg.validate();
  if (train.empty() || test.empty())
    throw ArgumentError("train_dne: train and test sets must be nonempty");

  GenerationState state{0, std::move(initial), {}};
  EvolveScratch scratch;
  Workspace ws;
  const auto t0 = std::chrono::steady_clock::now();
  double test_acc = 0.0;

  for (int g = 0; g < cfg.generations; ++g) {
    evolve_generation_impl(state, cfg, train, scratch);

    GenerationRecord rec;
    rec.generation = g;
    rec.train_correct = count_correct(state.parent, train, ws);
    rec.train_acc = static_cast<double>(rec.train_correct) /
                    static_cast<double>(train.size());
    if (g % cfg.eval_test_every == 0 || g == cfg.generations - 1) {
      test_acc = static_cast<double>(count_correct(state.parent, test, ws)) /
                 static_cast<double>(test.size());
    }
    rec.test_acc = test_acc;
    rec.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.history.push_back(rec);

    for (float v : state.parent.flat())
      if (!std::isfinite(v))
        throw NumericError("non-finite parent parameters at generation " +
                           std::to_string(g));
  }
  return {std::move(state.parent), std::move(state.history)};
}

void write_dne_history_csv(const std::vector<GenerationRecord>& history,
                           const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "generation,train_correct,train_acc,test_acc,elapsed_seconds\n";
  char buf[160];
  for (const GenerationRecord& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.3f\n", r.generation,
                  r.train_correct, r.train_acc, r.test_acc, r.elapsed_seconds);
    os << buf;
  }
}

}  // namespace evoclass
