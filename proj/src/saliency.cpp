#include "evoclass/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "evoclass/errors.hpp"
#include "evoclass/image_io.hpp"

namespace evoclass {

SaliencyMap occlusion_map(const ModelParams& params, const Tensor& image,
                          int target_class, int patch, int stride,
                          float fill_value, int workers) {
  const ArchitectureConfig& cfg = params.config();
  const int s = cfg.input_size;
  if (image.rank() != 3 || image.dim(1) != s || image.dim(2) != s)
    throw ArgumentError("occlusion_map: image does not match model input size");
  if (patch < 1 || patch > s) throw ArgumentError("occlusion_map: patch must be in [1, S]");
  if (stride < 1) throw ArgumentError("occlusion_map: stride must be >= 1");
  if (target_class < 0 || target_class >= cfg.num_classes)
    throw ArgumentError("occlusion_map: target class out of range");

  SaliencyMap map;
  map.image_size = s;
  map.patch = patch;
  map.stride = stride;
  map.target_class = target_class;
  map.grid_extent = (s - patch) / stride + 1;
  map.grid.assign(static_cast<size_t>(map.grid_extent) * map.grid_extent, 0.0f);

  Tensor base_probs = forward(params, image);
  const float p_base = base_probs.data[static_cast<size_t>(target_class)];
  const int g = map.grid_extent;

#pragma omp parallel for collapse(2) schedule(dynamic) num_threads(workers)
  for (int gy = 0; gy < g; ++gy) {
    for (int gx = 0; gx < g; ++gx) {
      Tensor occluded = image;
      const int y0 = gy * stride;
      const int x0 = gx * stride;
      for (int y = y0; y < y0 + patch; ++y)
        for (int x = x0; x < x0 + patch; ++x)
          occluded.data[static_cast<size_t>(y) * s + x] = fill_value;
      Tensor probs = forward(params, occluded);
      const float drop = p_base - probs.data[static_cast<size_t>(target_class)];
      map.grid[static_cast<size_t>(gy) * g + gx] = drop > 0.0f ? drop : 0.0f;
    }
  }

  // bilinear upsample over grid-cell centers, then normalize max to 1
  map.upsampled.assign(static_cast<size_t>(s) * s, 0.0f);
  const float half_patch = static_cast<float>(patch) / 2.0f;
  for (int y = 0; y < s; ++y) {
    const float fy = std::clamp((static_cast<float>(y) - half_patch) /
                                    static_cast<float>(stride),
                                0.0f, static_cast<float>(g - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, g - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int x = 0; x < s; ++x) {
      const float fx = std::clamp((static_cast<float>(x) - half_patch) /
                                      static_cast<float>(stride),
                                  0.0f, static_cast<float>(g - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, g - 1);
      const float wx = fx - static_cast<float>(x0);
      const float top = map.grid[static_cast<size_t>(y0) * g + x0] * (1.0f - wx) +
                        map.grid[static_cast<size_t>(y0) * g + x1] * wx;
      const float bot = map.grid[static_cast<size_t>(y1) * g + x0] * (1.0f - wx) +
                        map.grid[static_cast<size_t>(y1) * g + x1] * wx;
      map.upsampled[static_cast<size_t>(y) * s + x] = top * (1.0f - wy) + bot * wy;
    }
  }
  const float mx = *std::max_element(map.upsampled.begin(), map.upsampled.end());
  if (mx > 0.0f)
    for (float& v : map.upsampled) v /= mx;
  return map;
}

void render_heatmap(const SaliencyMap& map, const Tensor& base_image,
                    const std::filesystem::path& out_path) {
  const int s = map.image_size;
  if (base_image.rank() != 3 || base_image.dim(1) != s || base_image.dim(2) != s)
    throw ArgumentError("render_heatmap: base image size mismatch");
  GrayImage panel;
  panel.width = 2 * s;
  panel.height = s;
  panel.pixels.assign(static_cast<size_t>(2 * s) * s, 0.0f);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      panel.pixels[static_cast<size_t>(y) * 2 * s + x] =
          base_image.data[static_cast<size_t>(y) * s + x];
      panel.pixels[static_cast<size_t>(y) * 2 * s + s + x] =
          map.upsampled[static_cast<size_t>(y) * s + x];
    }
  write_pgm(out_path, panel);
}

void write_grid_csv(const SaliencyMap& map, const std::filesystem::path& out_path) {
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write " + out_path.string());
  os << "gy,gx,drop\n";
  char buf[64];
  for (int gy = 0; gy < map.grid_extent; ++gy)
    for (int gx = 0; gx < map.grid_extent; ++gx) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.7f\n", gy, gx,
                    map.grid[static_cast<size_t>(gy) * map.grid_extent + gx]);
      os << buf;
    }
}

std::pair<int, int> grid_argmax(const SaliencyMap& map) {
  int best = -1;
  float best_v = 0.0f;
  for (size_t i = 0; i < map.grid.size(); ++i)
    if (map.grid[i] > best_v) {
      best_v = map.grid[i];
      best = static_cast<int>(i);
    }
  if (best < 0) return {-1, -1};
  return {best / map.grid_extent, best % map.grid_extent};
}

}  // namespace evoclass
