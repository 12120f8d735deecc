#pragma once

#include <filesystem>
#include <vector>

namespace evoclass {

// Grayscale raster with pixels in [0,1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
};

// 8-bit binary PGM (P5). Deterministic output: fixed header, round-to-nearest.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

// PNG ingestion (any color type; converted to 8-bit gray).
GrayImage read_png_gray(const std::filesystem::path& path);

// Dispatch on extension: .pgm or .png.
GrayImage read_image(const std::filesystem::path& path);

GrayImage bilinear_resize(const GrayImage& src, int out_w, int out_h);

}  // namespace evoclass
