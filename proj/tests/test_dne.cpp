#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evoclass/dne.hpp"
#include "evoclass/errors.hpp"
#include "evoclass/rng.hpp"

using namespace evoclass;

namespace {

ArchitectureConfig micro_arch() {
  ArchitectureConfig cfg;
  cfg.input_size = 16;
  cfg.conv_layers = 2;
  cfg.channels = 8;
  cfg.fc_sizes = {16, 8};
  return cfg;
}

// Independent reimplementation of one generation: rank children by
// (fitness desc, index asc), keep the top half, add the mean of their
// perturbations scaled by eta.
ModelParams brute_force_generation(const ModelParams& parent, const DneConfig& cfg,
                                   int generation,
                                   const std::vector<LabeledSample>& train) {
  const int n = cfg.population;
  std::vector<std::vector<float>> deltas;
  std::vector<int> fitness;
  for (int i = 0; i < n; ++i) {
    deltas.push_back(mutate(parent, cfg.sigma,
                            dne_child_seed(cfg.master_seed, generation, i)));
    ModelParams child = parent;
    for (size_t j = 0; j < deltas.back().size(); ++j)
      child.flat()[j] = parent.flat()[j] + deltas.back()[j];
    fitness.push_back(evaluate_fitness(child, train));
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fitness[static_cast<size_t>(a)] >
                                              fitness[static_cast<size_t>(b)]; });
  std::vector<int> keep(order.begin(), order.begin() + n / 2);
  std::sort(keep.begin(), keep.end());

  ModelParams next = parent;
  std::vector<float> sum(parent.flat().size(), 0.0f);
  for (int idx : keep)
    for (size_t j = 0; j < sum.size(); ++j)
      sum[j] += deltas[static_cast<size_t>(idx)][j];
  const float inv = 1.0f / static_cast<float>(n / 2);
  for (size_t j = 0; j < sum.size(); ++j)
    next.flat()[j] = parent.flat()[j] + cfg.eta * (sum[j] * inv);
  return next;
}

}  // namespace

TEST_CASE("mutate is, deterministic, seed-keyed and sigma-scaled") {
  ModelParams parent = glorot_init(micro_arch(), 3);
  auto d1 = mutate(parent, 0.02f, 12345);
  auto d2 = mutate(parent, 0.02f, 12345);
  CHECK(d1 == d2);
  auto d3 = mutate(parent, 0.02f, 12346);
  CHECK(d1 != d3);

  auto zero = mutate(parent, 0.0f, 7);
  for (float v : zero) CHECK(v == 0.0f);

  // 10k draws of the first coordinate across child seeds
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  const float sigma = 0.02f;
  for (int i = 0; i < n; ++i) {
    Rng rng(dne_child_seed(99, 0, i));
    const double v = sigma * rng.gaussian();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double stdev = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.05 * sigma);
  CHECK(stdev == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("fitness counts correct predictions") {
  auto [train, test] = micro_dataset(17);
  (void)test;
  ModelParams zero(micro_arch());
  // zero params tie-break to class 0, so exactly the class-0 samples count
  int class0 = 0;
  for (const auto& s : train) class0 += s.label == Label::normal;
  CHECK(evaluate_fitness(zero, train) == class0);
  CHECK(class0 == 10);  // balanced 20-sample set

  // perfect oracle: relabel every sample with the model's own prediction
  ModelParams model = glorot_init(micro_arch(), 5);
  auto relabeled = train;
  for (auto& s : relabeled)
    s.label = static_cast<Label>(predict(model, s.image));
  CHECK(evaluate_fitness(model, relabeled) == static_cast<int>(relabeled.size()));

  CHECK_THROWS_AS(evaluate_fitness(zero, {}), ArgumentError);
}

TEST_CASE("evolve_generation matches the brute-force oracle") {
  auto [train, test] = micro_dataset(23);
  (void)test;
  for (int pop : {2, 4, 6}) {
    DneConfig cfg;
    cfg.population = pop;
    cfg.sigma = 0.05f;
    cfg.eta = 0.7f;
    cfg.master_seed = 31;
    cfg.workers = 2;

    GenerationState state{0, glorot_init(micro_arch(), 41), {}};
    ModelParams want = brute_force_generation(state.parent, cfg, 0, train);
    evolve_generation(state, cfg, train);
    CHECK(state.generation == 1);
    REQUIRE(state.parent.flat().size() == want.flat().size());
    for (size_t j = 0; j < want.flat().size(); ++j)
      REQUIRE(state.parent.flat()[j] == want.flat()[j]);
  }
}

TEST_CASE("selection keeps exactly half and never discards a fitter child") {
  auto [train, test] = micro_dataset(29);
  (void)test;
  DneConfig cfg;
  cfg.population = 8;
  cfg.sigma = 0.08f;
  cfg.master_seed = 57;

  GenerationState state{0, glorot_init(micro_arch(), 43), {}};
  // recompute the fitness landscape independently
  std::vector<int> fitness;
  for (int i = 0; i < cfg.population; ++i) {
    auto delta = mutate(state.parent, cfg.sigma, dne_child_seed(cfg.master_seed, 0, i));
    ModelParams child = state.parent;
    for (size_t j = 0; j < delta.size(); ++j) child.flat()[j] += delta[j];
    fitness.push_back(evaluate_fitness(child, train));
  }
  std::vector<int> sorted = fitness;
  std::sort(sorted.rbegin(), sorted.rend());
  const int cutoff = sorted[cfg.population / 2 - 1];

  ModelParams before = state.parent;
  evolve_generation(state, cfg, train);

  // reconstruct the selected set from the update
  std::vector<float> update(before.flat().size());
  for (size_t j = 0; j < update.size(); ++j)
    update[j] = state.parent.flat()[j] - before.flat()[j];
  // every selected child must meet the cutoff; verify via the oracle
  ModelParams want = brute_force_generation(before, cfg, 0, train);
  for (size_t j = 0; j < update.size(); ++j)
    REQUIRE(state.parent.flat()[j] == want.flat()[j]);
  CHECK(cutoff >= *std::min_element(sorted.begin(), sorted.begin() + cfg.population / 2));
}

TEST_CASE("sigma zero keeps the parent") {
  auto [train, test] = micro_dataset(37);
  (void)test;
  DneConfig cfg;
  cfg.population = 4;
  cfg.sigma = 0.0f;  // degenerate, allowed at the operation level
  cfg.master_seed = 3;
  GenerationState state{0, glorot_init(micro_arch(), 47), {}};
  ModelParams before = state.parent;
  evolve_generation(state, cfg, train);
  for (size_t j = 0; j < before.flat().size(); ++j)
    REQUIRE(state.parent.flat()[j] == before.flat()[j]);
}

TEST_CASE("config validation") {
  DneConfig cfg;
  cfg.population = 3;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = DneConfig{};
  cfg.sigma = -0.1f;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = DneConfig{};
  cfg.generations = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("perturbations depend only on seed, generation, index and sigma") {
  ModelParams parent = glorot_init(micro_arch(), 51);
  // two different datasets, same seeds: identical perturbations
  auto [train_a, test_a] = micro_dataset(1);
  auto [train_b, test_b] = micro_dataset(2);
  (void)test_a;
  (void)test_b;
  auto flipped = train_b;
  for (auto& s : flipped)
    s.label = s.label == Label::normal ? Label::metastasis : Label::normal;

  const uint64_t seed = dne_child_seed(77, 4, 9);
  auto d1 = mutate(parent, 0.03f, seed);
  evaluate_fitness(parent, train_a);  // consuming data must not disturb anything
  auto d2 = mutate(parent, 0.03f, seed);
  evaluate_fitness(parent, flipped);
  auto d3 = mutate(parent, 0.03f, seed);
  CHECK(d1 == d2);
  CHECK(d1 == d3);
}

TEST_CASE("train_dne for one generation equals one evolve_generation") {
  auto [train, test] = micro_dataset(61);
  DneConfig cfg;
  cfg.population = 4;
  cfg.sigma = 0.05f;
  cfg.generations = 1;
  cfg.master_seed = 71;

  ModelParams initial = glorot_init(micro_arch(), 53);
  GenerationState manual{0, initial, {}};
  evolve_generation(manual, cfg, train);

  DneResult res = train_dne(cfg, initial, train, test);
  REQUIRE(res.history.size() == 1);
  for (size_t j = 0; j < initial.flat().size(); ++j)
    REQUIRE(res.params.flat()[j] == manual.parent.flat()[j]);
}

TEST_CASE("history stays in range and is deterministic across worker counts") {
  auto [train, test] = micro_dataset(67);
  DneConfig cfg;
  cfg.population = 6;
  cfg.sigma = 0.05f;
  cfg.generations = 3;
  cfg.master_seed = 73;
  ModelParams initial = glorot_init(micro_arch(), 59);

  cfg.workers = 1;
  DneResult a = train_dne(cfg, initial, train, test);
  cfg.workers = 3;
  DneResult b = train_dne(cfg, initial, train, test);

  REQUIRE(a.history.size() == 3);
  for (const GenerationRecord& r : a.history) {
    CHECK(r.train_acc >= 0.0);
    CHECK(r.train_acc <= 1.0);
    CHECK(r.test_acc >= 0.0);
    CHECK(r.test_acc <= 1.0);
    CHECK(r.train_correct >= 0);
    CHECK(r.train_correct <= static_cast<int>(train.size()));
  }
  for (size_t j = 0; j < a.params.flat().size(); ++j)
    REQUIRE(a.params.flat()[j] == b.params.flat()[j]);
}

TEST_CASE("micro benchmark: evolution reaches perfect training accuracy") {
  int successes = 0;
  for (uint64_t seed : {101, 202, 303}) {
    auto [train, test] = micro_dataset(seed);
    (void)test;
    DneConfig cfg;
    cfg.population = 12;
    cfg.sigma = 0.05f;
    cfg.generations = 200;
    cfg.master_seed = seed;
    // stop early once solved to keep the suite quick
    GenerationState state{0, glorot_init(micro_arch(), derive(seed, "init")), {}};
    bool solved = false;
    for (int g = 0; g < cfg.generations && !solved; ++g) {
      evolve_generation(state, cfg, train);
      solved = evaluate_fitness(state.parent, train) ==
               static_cast<int>(train.size());
    }
    successes += solved;
  }
  CHECK(successes >= 2);
}
