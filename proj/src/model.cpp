#include "evoclass/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evoclass/errors.hpp"
#include "evoclass/kernels.hpp"
#include "evoclass/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts unsupported");

namespace evoclass {

void ArchitectureConfig::validate() const {
  if (input_size < 16) throw ArgumentError("input_size must be >= 16");
  if (input_channels < 1) throw ArgumentError("input_channels must be >= 1");
  if (conv_layers < 1) throw ArgumentError("conv_layers must be >= 1");
  if (channels < 1) throw ArgumentError("channels must be >= 1");
  if (kernel != 3) throw ArgumentError("only 3x3 kernels are supported");
  if (stride < 1 || pad < 0) throw ArgumentError("bad stride/pad");
  if (num_classes != 2) throw ArgumentError("num_classes must be 2");
  for (int s : fc_sizes)
    if (s < 1) throw ArgumentError("fc sizes must be positive");
  for (int s : spatial_chain())
    if (s < 1) throw ArgumentError("spatial size collapses below 1 before the last conv");
}

std::vector<int> ArchitectureConfig::spatial_chain() const {
  std::vector<int> chain{input_size};
  int s = input_size;
  for (int i = 0; i < conv_layers; ++i) {
    s = conv_out_extent(s, kernel, stride, pad);
    chain.push_back(s);
  }
  return chain;
}

int ArchitectureConfig::flatten_size() const {
  return channels * spatial_chain().back() * spatial_chain().back();
}

int64_t ArchitectureConfig::param_count() const {
  int64_t n = 0;
  int cin = input_channels;
  for (int i = 0; i < conv_layers; ++i) {
    n += static_cast<int64_t>(channels) * cin * kernel * kernel + channels;
    cin = channels;
  }
  int in_n = flatten_size();
  for (int out_n : fc_sizes) {
    n += static_cast<int64_t>(out_n) * in_n + out_n;
    in_n = out_n;
  }
  n += static_cast<int64_t>(num_classes) * in_n + num_classes;
  return n;
}

ModelParams::ModelParams(const ArchitectureConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t off = 0;
  auto add = [&](std::string id, std::vector<int> wshape, int blen) {
    LayerSpec spec;
    spec.id = std::move(id);
    spec.weight_shape = std::move(wshape);
    spec.bias_len = blen;
    spec.weight_offset = off;
    off += spec.weight_len();
    spec.bias_offset = off;
    off += blen;
    layers_.push_back(std::move(spec));
  };
  int cin = cfg_.input_channels;
  for (int i = 0; i < cfg_.conv_layers; ++i) {
    add("conv" + std::to_string(i + 1), {cfg_.channels, cin, cfg_.kernel, cfg_.kernel},
        cfg_.channels);
    cin = cfg_.channels;
  }
  int in_n = cfg_.flatten_size();
  for (size_t i = 0; i < cfg_.fc_sizes.size(); ++i) {
    add("fc" + std::to_string(i + 1), {cfg_.fc_sizes[i], in_n}, cfg_.fc_sizes[i]);
    in_n = cfg_.fc_sizes[i];
  }
  add("out", {cfg_.num_classes, in_n}, cfg_.num_classes);
  flat_.assign(static_cast<size_t>(off), 0.0f);
}

int64_t LayerSpec::weight_len() const {
  int64_t n = 1;
  for (int e : weight_shape) n *= e;
  return n;
}

std::span<float> ModelParams::weights(size_t layer) {
  const LayerSpec& l = layers_[layer];
  return {flat_.data() + l.weight_offset, static_cast<size_t>(l.weight_len())};
}
std::span<const float> ModelParams::weights(size_t layer) const {
  const LayerSpec& l = layers_[layer];
  return {flat_.data() + l.weight_offset, static_cast<size_t>(l.weight_len())};
}
std::span<float> ModelParams::bias(size_t layer) {
  const LayerSpec& l = layers_[layer];
  return {flat_.data() + l.bias_offset, static_cast<size_t>(l.bias_len)};
}
std::span<const float> ModelParams::bias(size_t layer) const {
  const LayerSpec& l = layers_[layer];
  return {flat_.data() + l.bias_offset, static_cast<size_t>(l.bias_len)};
}

void Workspace::ensure(const ArchitectureConfig& cfg) {
  size_t need = static_cast<size_t>(cfg.channels) * cfg.input_size * cfg.input_size;
  for (int s : cfg.fc_sizes) need = std::max(need, static_cast<size_t>(s));
  if (a.size() < need) a.resize(need);
  if (b.size() < need) b.resize(need);
}

ModelParams glorot_init(const ArchitectureConfig& cfg, uint64_t seed) {
  ModelParams p(cfg);
  const auto& layers = p.layers();
  for (size_t li = 0; li < layers.size(); ++li) {
    const auto& shape = layers[li].weight_shape;
    // fan counts: conv weights are [c_out, c_in, k, k]; dense are [out, in].
    double fan_in, fan_out;
    if (shape.size() == 4) {
      fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      fan_out = static_cast<double>(shape[0]) * shape[2] * shape[3];
    } else {
      fan_in = shape[1];
      fan_out = shape[0];
    }
    const float limit = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
    Rng rng(derive(seed, static_cast<uint64_t>(li)));
    for (float& w : p.weights(li)) w = (2.0f * rng.next_float() - 1.0f) * limit;
    // biases stay zero
  }
  return p;
}

void forward_logits(const ModelParams& params, const float* image,
                    Workspace& ws, float* logits) {
  const ArchitectureConfig& cfg = params.config();
  ws.ensure(cfg);
  const auto chain = cfg.spatial_chain();

  const float* x = image;
  float* cur = ws.a.data();
  float* nxt = ws.b.data();
  int cin = cfg.input_channels;
  for (int i = 0; i < cfg.conv_layers; ++i) {
    const int h = chain[static_cast<size_t>(i)];
    const int oh = chain[static_cast<size_t>(i) + 1];
    kernels::conv2d_forward(x, cin, h, h, params.weights(static_cast<size_t>(i)).data(),
                            params.bias(static_cast<size_t>(i)).data(), cfg.channels,
                            cfg.stride, cfg.pad, cur, oh, oh);
    const int n = cfg.channels * oh * oh;
    kernels::relu_forward(cur, n, cur);
    x = cur;
    std::swap(cur, nxt);
    cin = cfg.channels;
  }

  // x now holds the flattened conv output.
  int in_n = cfg.flatten_size();
  for (size_t i = 0; i < cfg.fc_sizes.size(); ++i) {
    const size_t li = static_cast<size_t>(cfg.conv_layers) + i;
    const int out_n = cfg.fc_sizes[i];
    kernels::dense_forward(x, params.weights(li).data(), params.bias(li).data(),
                           out_n, in_n, cur);
    kernels::relu_forward(cur, out_n, cur);
    x = cur;
    std::swap(cur, nxt);
    in_n = out_n;
  }

  const size_t li = params.layers().size() - 1;
  kernels::dense_forward(x, params.weights(li).data(), params.bias(li).data(),
                         cfg.num_classes, in_n, logits);
}

Tensor forward(const ModelParams& params, const Tensor& image) {
  const ArchitectureConfig& cfg = params.config();
  if (image.rank() != 3 || image.dim(0) != cfg.input_channels ||
      image.dim(1) != cfg.input_size || image.dim(2) != cfg.input_size)
    throw ArgumentError("forward: image must be [" + std::to_string(cfg.input_channels) +
                        "," + std::to_string(cfg.input_size) + "," +
                        std::to_string(cfg.input_size) + "]");
  thread_local Workspace ws;
  Tensor logits({cfg.num_classes});
  forward_logits(params, image.ptr(), ws, logits.ptr());
  return softmax(logits);
}

int predict(const ModelParams& params, const float* image, Workspace& ws) {
  float logits[2];
  forward_logits(params, image, ws, logits);
  return logits[1] > logits[0] ? 1 : 0;
}

int predict(const ModelParams& params, const Tensor& image) {
  Tensor probs = forward(params, image);
  return probs.data[1] > probs.data[0] ? 1 : 0;
}

namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', '1'};
constexpr uint8_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("model file truncated in header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

// Rebuild the architecture from the stored layer shapes. stride/pad are
// family constants (2/1); everything else is recoverable.
ArchitectureConfig infer_config(const std::vector<std::vector<int>>& wshapes) {
  ArchitectureConfig cfg;
  cfg.conv_layers = 0;
  cfg.fc_sizes.clear();
  size_t i = 0;
  while (i < wshapes.size() && wshapes[i].size() == 4) ++i;
  cfg.conv_layers = static_cast<int>(i);
  if (cfg.conv_layers == 0 || i == wshapes.size())
    throw DataError("model file does not describe a conv+fc architecture");
  cfg.channels = wshapes[0][0];
  cfg.input_channels = wshapes[0][1];
  cfg.kernel = wshapes[0][2];
  for (size_t j = i; j + 1 < wshapes.size(); ++j) {
    if (wshapes[j].size() != 2) throw DataError("unexpected tensor rank in model file");
    cfg.fc_sizes.push_back(wshapes[j][0]);
  }
  cfg.num_classes = wshapes.back()[0];
  const int flatten = wshapes[i][1];
  if (flatten % cfg.channels != 0) throw DataError("model file flatten size is inconsistent");
  const int spatial_sq = flatten / cfg.channels;
  const int spatial = static_cast<int>(std::lround(std::sqrt(static_cast<double>(spatial_sq))));
  if (spatial * spatial != spatial_sq)
    throw DataError("model file flatten size is not square");
  cfg.input_size = spatial << cfg.conv_layers;
  return cfg;
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  write_u32(os, static_cast<uint32_t>(params.layers().size()));
  for (const LayerSpec& l : params.layers()) {
    write_u32(os, static_cast<uint32_t>(l.weight_shape.size()));
    for (int e : l.weight_shape) write_u32(os, static_cast<uint32_t>(e));
    write_u32(os, 1);
    write_u32(os, static_cast<uint32_t>(l.bias_len));
  }
  const auto flat = params.flat();
  os.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!os) throw DataError("short write to " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path.string() + ": bad magic, not a model file");
  const int version = is.get();
  if (version != kVersion)
    throw DataError(path.string() + ": unsupported version " + std::to_string(version));
  const uint32_t n_layers = read_u32(is);
  if (n_layers == 0 || n_layers > 1024) throw DataError("implausible layer count");

  std::vector<std::vector<int>> wshapes;
  std::vector<int> blens;
  for (uint32_t i = 0; i < n_layers; ++i) {
    const uint32_t rank = read_u32(is);
    if (rank == 0 || rank > 4) throw DataError("bad weight tensor rank in model file");
    std::vector<int> shape(rank);
    for (uint32_t j = 0; j < rank; ++j) shape[j] = static_cast<int>(read_u32(is));
    const uint32_t brank = read_u32(is);
    if (brank != 1) throw DataError("bad bias tensor rank in model file");
    blens.push_back(static_cast<int>(read_u32(is)));
    wshapes.push_back(std::move(shape));
  }

  ModelParams params(infer_config(wshapes));
  if (params.layers().size() != wshapes.size())
    throw DataError("model file layer count does not match inferred architecture");
  for (size_t i = 0; i < wshapes.size(); ++i) {
    const LayerSpec& l = params.layers()[i];
    if (l.weight_shape != wshapes[i] || l.bias_len != blens[i])
      throw DataError("layer " + l.id + ": stored shape is inconsistent");
  }

  auto flat = params.flat();
  is.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (is.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(float)))
    throw DataError(path.string() + ": truncated parameter data");
  is.peek();
  if (!is.eof()) throw DataError(path.string() + ": trailing bytes after parameter data");
  return params;
}

ModelParams load_params(const std::filesystem::path& path,
                        const ArchitectureConfig& expected) {
  ModelParams params = load_params(path);
  ModelParams want(expected);
  if (params.layers().size() != want.layers().size())
    throw DataError(path.string() + ": layer count " +
                    std::to_string(params.layers().size()) + ", expected " +
                    std::to_string(want.layers().size()));
  for (size_t i = 0; i < want.layers().size(); ++i) {
    const LayerSpec& got = params.layers()[i];
    const LayerSpec& exp = want.layers()[i];
    if (got.weight_shape != exp.weight_shape || got.bias_len != exp.bias_len) {
      std::ostringstream os;
      os << path.string() << ": layer " << exp.id << " shape mismatch (got [";
      for (size_t j = 0; j < got.weight_shape.size(); ++j)
        os << (j ? "," : "") << got.weight_shape[j];
      os << "], expected [";
      for (size_t j = 0; j < exp.weight_shape.size(); ++j)
        os << (j ? "," : "") << exp.weight_shape[j];
      os << "])";
      throw DataError(os.str());
    }
  }
  return params;
}

}  // namespace evoclass
