#include "evoclass/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "evoclass/errors.hpp"
#include "evoclass/kernels.hpp"

namespace evoclass {

namespace {

int64_t product(const std::vector<int>& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<int> s)
    : shape(std::move(s)), data(static_cast<size_t>(product(shape)), 0.0f) {}

Tensor::Tensor(std::vector<int> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (product(shape) != static_cast<int64_t>(data.size()))
    throw ArgumentError("tensor shape " + shape_str(shape) +
                        " does not match data length " + std::to_string(data.size()));
}

int64_t Tensor::numel() const { return product(shape); }

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

int conv_out_extent(int in, int kernel, int stride, int pad) {
  if (stride < 1) throw ArgumentError("conv stride must be >= 1");
  if (pad < 0) throw ArgumentError("conv pad must be >= 0");
  if (in + 2 * pad < kernel)
    throw ArgumentError("conv input extent " + std::to_string(in) + " with pad " +
                        std::to_string(pad) + " is smaller than the kernel");
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, int stride, int pad) {
  if (input.rank() != 3)
    throw ArgumentError("conv2d input must be rank 3, got " + shape_str(input.shape));
  if (weights.rank() != 4 || weights.dim(2) != 3 || weights.dim(3) != 3)
    throw ArgumentError("conv2d weights must be [c_out,c_in,3,3], got " +
                        shape_str(weights.shape));
  if (weights.dim(1) != input.dim(0))
    throw ArgumentError("conv2d channel mismatch: input has " +
                        std::to_string(input.dim(0)) + " channels, weights expect " +
                        std::to_string(weights.dim(1)));
  if (bias.numel() != weights.dim(0))
    throw ArgumentError("conv2d bias length must equal c_out");

  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = weights.dim(0);
  const int oh = conv_out_extent(h, 3, stride, pad);
  const int ow = conv_out_extent(w, 3, stride, pad);
  Tensor out({c_out, oh, ow});
  kernels::conv2d_forward(input.ptr(), c_in, h, w, weights.ptr(), bias.ptr(),
                          c_out, stride, pad, out.ptr(), oh, ow);
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& weights, int stride, int pad) {
  if (input.rank() != 3 || weights.rank() != 4)
    throw ArgumentError("conv2d_backward: bad input/weight rank");
  if (weights.dim(1) != input.dim(0))
    throw ArgumentError("conv2d_backward channel mismatch");
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = weights.dim(0);
  const int oh = conv_out_extent(h, 3, stride, pad);
  const int ow = conv_out_extent(w, 3, stride, pad);
  if (grad_out.rank() != 3 || grad_out.dim(0) != c_out || grad_out.dim(1) != oh ||
      grad_out.dim(2) != ow)
    throw ArgumentError("conv2d_backward: grad_out shape " + shape_str(grad_out.shape) +
                        " does not match forward output");

  Conv2dGrads g{Tensor(input.shape), Tensor(weights.shape), Tensor({c_out})};
  kernels::conv2d_backward_input(grad_out.ptr(), weights.ptr(), c_in, h, w, c_out,
                                 stride, pad, g.grad_input.ptr(), oh, ow);
  kernels::conv2d_backward_weights(grad_out.ptr(), input.ptr(), c_in, h, w, c_out,
                                   stride, pad, g.grad_weights.ptr(),
                                   g.grad_bias.ptr(), oh, ow);
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y(x.shape);
  kernels::relu_forward(x.ptr(), static_cast<int>(x.numel()), y.ptr());
  return y;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& x) {
  if (grad_out.numel() != x.numel())
    throw ArgumentError("relu_backward: grad length mismatch");
  Tensor g(x.shape);
  kernels::relu_backward(grad_out.ptr(), x.ptr(), static_cast<int>(x.numel()), g.ptr());
  return g;
}

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2)
    throw ArgumentError("dense weights must be rank 2, got " + shape_str(weights.shape));
  const int out_n = weights.dim(0), in_n = weights.dim(1);
  if (x.numel() != in_n)
    throw ArgumentError("dense input length " + std::to_string(x.numel()) +
                        " != weight in dimension " + std::to_string(in_n));
  if (bias.numel() != out_n) throw ArgumentError("dense bias length must equal out");
  Tensor y({out_n});
  kernels::dense_forward(x.ptr(), weights.ptr(), bias.ptr(), out_n, in_n, y.ptr());
  return y;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x,
                          const Tensor& weights) {
  const int out_n = weights.dim(0), in_n = weights.dim(1);
  if (grad_out.numel() != out_n || x.numel() != in_n)
    throw ArgumentError("dense_backward: shape mismatch");
  DenseGrads g{Tensor({in_n}), Tensor(weights.shape), Tensor({out_n})};
  kernels::dense_backward_input(grad_out.ptr(), weights.ptr(), out_n, in_n,
                                g.grad_input.ptr());
  kernels::dense_backward_weights(grad_out.ptr(), x.ptr(), out_n, in_n,
                                  g.grad_weights.ptr(), g.grad_bias.ptr());
  return g;
}

Tensor softmax(const Tensor& logits) {
  const int k = static_cast<int>(logits.numel());
  Tensor p(logits.shape);
  double mx = logits.data[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits.data[i]));
  double sum = 0.0;
  std::vector<double> e(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    e[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits.data[i]) - mx);
    sum += e[static_cast<size_t>(i)];
  }
  for (int i = 0; i < k; ++i)
    p.data[static_cast<size_t>(i)] = static_cast<float>(e[static_cast<size_t>(i)] / sum);
  return p;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, int label) {
  const int k = static_cast<int>(logits.numel());
  if (k < 2) throw ArgumentError("softmax_cross_entropy needs at least 2 logits");
  if (label < 0 || label >= k)
    throw ArgumentError("label " + std::to_string(label) + " out of range [0," +
                        std::to_string(k) + ")");
  double mx = logits.data[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits.data[i]));
  double sum = 0.0;
  std::vector<double> e(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    e[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits.data[i]) - mx);
    sum += e[static_cast<size_t>(i)];
  }
  SoftmaxLoss r;
  r.grad_logits = Tensor(logits.shape);
  for (int i = 0; i < k; ++i) {
    const double p = e[static_cast<size_t>(i)] / sum;
    r.grad_logits.data[static_cast<size_t>(i)] =
        static_cast<float>(p - (i == label ? 1.0 : 0.0));
  }
  const double log_p = static_cast<double>(logits.data[static_cast<size_t>(label)]) -
                       mx - std::log(sum);
  r.loss = static_cast<float>(-log_p);
  return r;
}

}  // namespace evoclass
