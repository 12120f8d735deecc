// Compares the OpenMP kernels against the serial reference, and times the
// pieces that dominate training: conv2d, the dense layers, whole-model
// forward, and one DNE generation at different worker counts.
//
// Run: ./kernel_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <vector>

#include "evoclass/data.hpp"
#include "evoclass/dne.hpp"
#include "evoclass/kernels.hpp"
#include "evoclass/model.hpp"
#include "evoclass/reference_kernels.hpp"
#include "evoclass/rng.hpp"

namespace {

using namespace evoclass;

struct ConvCase {
  int c_in, h, c_out;
  std::vector<float> in, wt, bias, out;
  int oh;
  ConvCase(int c_in_, int h_, int c_out_) : c_in(c_in_), h(h_), c_out(c_out_) {
    Rng rng(7);
    in.resize(static_cast<size_t>(c_in) * h * h);
    wt.resize(static_cast<size_t>(c_out) * c_in * 9);
    bias.resize(static_cast<size_t>(c_out));
    for (auto* v : {&in, &wt, &bias})
      for (float& x : *v) x = rng.next_float() - 0.5f;
    oh = conv_out_extent(h, 3, 2, 1);
    out.resize(static_cast<size_t>(c_out) * oh * oh);
  }
};

void BM_Conv2dForward_Ref(benchmark::State& state) {
  ConvCase c(32, 64, 32);
  for (auto _ : state) {
    ref::conv2d_forward(c.in.data(), c.c_in, c.h, c.h, c.wt.data(), c.bias.data(),
                        c.c_out, 2, 1, c.out.data(), c.oh, c.oh);
    benchmark::DoNotOptimize(c.out.data());
  }
}
BENCHMARK(BM_Conv2dForward_Ref);

void BM_Conv2dForward_Omp(benchmark::State& state) {
  ConvCase c(32, 64, 32);
  for (auto _ : state) {
    kernels::conv2d_forward(c.in.data(), c.c_in, c.h, c.h, c.wt.data(), c.bias.data(),
                            c.c_out, 2, 1, c.out.data(), c.oh, c.oh);
    benchmark::DoNotOptimize(c.out.data());
  }
}
BENCHMARK(BM_Conv2dForward_Omp);

void BM_DenseForward_Ref(benchmark::State& state) {
  Rng rng(9);
  const int out_n = 512, in_n = 2048;
  std::vector<float> x(in_n), wt(static_cast<size_t>(out_n) * in_n), b(out_n), y(out_n);
  for (auto* v : {&x, &wt, &b})
    for (float& f : *v) f = rng.next_float() - 0.5f;
  for (auto _ : state) {
    ref::dense_forward(x.data(), wt.data(), b.data(), out_n, in_n, y.data());
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DenseForward_Ref);

void BM_DenseForward_Omp(benchmark::State& state) {
  Rng rng(9);
  const int out_n = 512, in_n = 2048;
  std::vector<float> x(in_n), wt(static_cast<size_t>(out_n) * in_n), b(out_n), y(out_n);
  for (auto* v : {&x, &wt, &b})
    for (float& f : *v) f = rng.next_float() - 0.5f;
  for (auto _ : state) {
    kernels::dense_forward(x.data(), wt.data(), b.data(), out_n, in_n, y.data());
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DenseForward_Omp);

void BM_ModelForward(benchmark::State& state) {
  ArchitectureConfig cfg;
  cfg.input_size = static_cast<int>(state.range(0));
  ModelParams params = glorot_init(cfg, 11);
  Rng rng(13);
  std::vector<float> img(static_cast<size_t>(cfg.input_size) * cfg.input_size);
  for (float& v : img) v = rng.next_float();
  Workspace ws;
  float logits[2];
  for (auto _ : state) {
    forward_logits(params, img.data(), ws, logits);
    benchmark::DoNotOptimize(logits);
  }
}
BENCHMARK(BM_ModelForward)->Arg(64)->Arg(128);

void BM_DneGeneration(benchmark::State& state) {
  ArchitectureConfig arch;
  arch.input_size = 64;
  auto [train, test] = micro_dataset(3);
  (void)test;
  CorpusSpec spec;
  spec.master_seed = 5;
  Corpus corpus = generate_corpus(spec, 1);
  std::vector<LabeledSample> tr;
  for (auto& s : corpus.samples)
    if (s.split == Split::train) tr.push_back(std::move(s));

  DneConfig cfg;
  cfg.population = 8;
  cfg.generations = 1;
  cfg.master_seed = 17;
  cfg.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    GenerationState gs{0, glorot_init(arch, 19), {}};
    evolve_generation(gs, cfg, tr);
    benchmark::DoNotOptimize(gs.parent.flat().data());
  }
}
BENCHMARK(BM_DneGeneration)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
