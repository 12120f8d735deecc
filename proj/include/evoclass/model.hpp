#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evoclass/tensor.hpp"

namespace evoclass {

// The classifier family: a stack of 3x3 stride-2 pad-1 convolutions with
// ReLU, flattened into a ReLU MLP, ending in num_classes logits.
struct ArchitectureConfig {
  int input_size = 128;
  int input_channels = 1;
  int conv_layers = 4;
  int channels = 32;
  int kernel = 3;
  int stride = 2;
  int pad = 1;
  std::vector<int> fc_sizes{512, 256, 128};
  int num_classes = 2;

  void validate() const;  // throws ArgumentError
  // Spatial extent after each conv layer, front-loaded with the input size.
  std::vector<int> spatial_chain() const;
  int flatten_size() const;
  int64_t param_count() const;
};

struct LayerSpec {
  std::string id;
  std::vector<int> weight_shape;
  int bias_len;
  int64_t weight_offset;
  int64_t bias_offset;
  int64_t weight_len() const;
};

// Ordered layer parameters over one contiguous float buffer. The flat
// view IS the storage, so flat<->structured round trips are identities
// by construction and mutation is a vector add.
class ModelParams {
 public:
  explicit ModelParams(const ArchitectureConfig& cfg);

  const ArchitectureConfig& config() const { return cfg_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::span<float> flat() { return flat_; }
  std::span<const float> flat() const { return flat_; }

  std::span<float> weights(size_t layer);
  std::span<const float> weights(size_t layer) const;
  std::span<float> bias(size_t layer);
  std::span<const float> bias(size_t layer) const;

 private:
  ArchitectureConfig cfg_;
  std::vector<LayerSpec> layers_;
  std::vector<float> flat_;
};

// Scratch activations reused across forward calls; one per thread.
struct Workspace {
  std::vector<float> a;
  std::vector<float> b;
  void ensure(const ArchitectureConfig& cfg);
};

ModelParams glorot_init(const ArchitectureConfig& cfg, uint64_t seed);

void forward_logits(const ModelParams& params, const float* image,
                    Workspace& ws, float* logits);

// probs over {Normal=0, Metastasis=1}; sums to 1.
Tensor forward(const ModelParams& params, const Tensor& image);

// argmax of probs; exact tie goes to class 0.
int predict(const ModelParams& params, const Tensor& image);
int predict(const ModelParams& params, const float* image, Workspace& ws);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
// Validates the file against an expected architecture; the error names
// the first offending layer.
ModelParams load_params(const std::filesystem::path& path,
                        const ArchitectureConfig& expected);

}  // namespace evoclass
