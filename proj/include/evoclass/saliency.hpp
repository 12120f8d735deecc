#pragma once

#include <filesystem>

#include "evoclass/model.hpp"
#include "evoclass/tensor.hpp"

namespace evoclass {

struct SaliencyMap {
  int image_size = 0;
  int patch = 0;
  int stride = 0;
  int grid_extent = 0;          // positions per axis
  int target_class = 0;
  std::vector<float> grid;      // occlusion-induced probability drops, >= 0
  std::vector<float> upsampled; // bilinear to image size, max-normalized to [0,1]
};

// Gradient-free attribution: slide a fill-valued square over the image
// and record max(0, p_base - p_occluded) for the target class. Positions
// are independent forward passes; worker count never changes the result.
SaliencyMap occlusion_map(const ModelParams& params, const Tensor& image,
                          int target_class, int patch = 16, int stride = 8,
                          float fill_value = 0.5f, int workers = 1);

// Side-by-side 8-bit PGM panel: base image left, heatmap right (2S x S).
void render_heatmap(const SaliencyMap& map, const Tensor& base_image,
                    const std::filesystem::path& out_path);

void write_grid_csv(const SaliencyMap& map, const std::filesystem::path& out_path);

// Index of the strongest grid cell; (-1,-1) if the map is all zero.
std::pair<int, int> grid_argmax(const SaliencyMap& map);

}  // namespace evoclass
