#include "evoclass/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "evoclass/errors.hpp"

namespace evoclass {

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.pixels[static_cast<size_t>(y) * img.width + x], 0.0f, 1.0f);
      row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(row.data()), img.width);
  }
  if (!os) throw DataError("short write to " + path.string());
}

namespace {

int next_pgm_token(std::istream& is) {
  // skips whitespace and '#' comments
  int c = is.get();
  while (is) {
    if (c == '#') {
      while (is && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  int value = 0;
  bool any = false;
  while (is && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = is.get();
  }
  if (!any) throw DataError("malformed PGM header");
  return value;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '5') throw DataError(path.string() + ": not a binary PGM (P5)");
  GrayImage img;
  img.width = next_pgm_token(is);
  img.height = next_pgm_token(is);
  const int maxval = next_pgm_token(is);
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
    throw DataError(path.string() + ": unsupported PGM geometry or maxval");
  const size_t n = static_cast<size_t>(img.width) * img.height;
  std::vector<unsigned char> raw(n);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n))
    throw DataError(path.string() + ": truncated PGM data");
  img.pixels.resize(n);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<float>(raw[i]) * inv;
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError(path.string() + ": PNG decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray(png, PNG_ERROR_ACTION_NONE, -1, -1);
  png_read_update_info(png, info);

  GrayImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  std::vector<unsigned char> row(png_get_rowbytes(png, info));
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < img.width; ++x)
      img.pixels[static_cast<size_t>(y) * img.width + x] =
          static_cast<float>(row[static_cast<size_t>(x)]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

GrayImage read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png_gray(path);
  throw DataError(path.string() + ": unsupported image extension (want .pgm or .png)");
}

GrayImage bilinear_resize(const GrayImage& src, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ArgumentError("resize target must be positive");
  if (src.width == out_w && src.height == out_h) return src;
  GrayImage dst;
  dst.width = out_w;
  dst.height = out_h;
  dst.pixels.resize(static_cast<size_t>(out_w) * out_h);
  const float sx = static_cast<float>(src.width) / static_cast<float>(out_w);
  const float sy = static_cast<float>(src.height) / static_cast<float>(out_h);
  for (int y = 0; y < out_h; ++y) {
    const float fy = std::clamp((static_cast<float>(y) + 0.5f) * sy - 0.5f, 0.0f,
                                static_cast<float>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int x = 0; x < out_w; ++x) {
      const float fx = std::clamp((static_cast<float>(x) + 0.5f) * sx - 0.5f, 0.0f,
                                  static_cast<float>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const float wx = fx - static_cast<float>(x0);
      const float top = src.pixels[static_cast<size_t>(y0) * src.width + x0] * (1.0f - wx) +
                        src.pixels[static_cast<size_t>(y0) * src.width + x1] * wx;
      const float bot = src.pixels[static_cast<size_t>(y1) * src.width + x0] * (1.0f - wx) +
                        src.pixels[static_cast<size_t>(y1) * src.width + x1] * wx;
      dst.pixels[static_cast<size_t>(y) * out_w + x] = top * (1.0f - wy) + bot * wy;
    }
  }
  return dst;
}

}  // namespace evoclass
