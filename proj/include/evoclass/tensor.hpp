#pragma once

#include <cstdint>
#include <vector>

namespace evoclass {

// Dense row-major float32 array. Shape is (channels, height, width) for
// images and feature maps, (out, in) for dense weights, or a flat length.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<float> d);

  int64_t numel() const;
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
  bool all_finite() const;
};

// floor((in + 2*pad - kernel) / stride) + 1
int conv_out_extent(int in, int kernel, int stride, int pad);

// Tensor-level ops. Shapes are validated; mismatches throw ArgumentError.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, int stride, int pad);

struct Conv2dGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weights, int stride, int pad);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& grad_out, const Tensor& x);

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x,
                          const Tensor& weights);

Tensor softmax(const Tensor& logits);

struct SoftmaxLoss {
  float loss;
  Tensor grad_logits;
};
// loss = -log softmax(logits)[label], max-subtracted for stability;
// grad = softmax(logits) - onehot(label).
SoftmaxLoss softmax_cross_entropy(const Tensor& logits, int label);

}  // namespace evoclass
