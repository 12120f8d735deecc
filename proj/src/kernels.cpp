#include "evoclass/kernels.hpp"

#include <algorithm>
#include <vector>

namespace evoclass::kernels {

namespace {

// Valid output range for one kernel tap: iy = oy*stride - pad + k in [0, extent).
inline void tap_range(int k, int stride, int pad, int extent, int out_extent,
                      int* lo, int* hi) {
  int first = 0;
  if (pad - k > 0) first = (pad - k + stride - 1) / stride;
  const int num = extent - 1 + pad - k;  // may be negative: tap never lands
  int last = num < 0 ? -1 : num / stride;
  if (last > out_extent - 1) last = out_extent - 1;
  *lo = first;
  *hi = last;  // inclusive; empty when hi < lo
}

}  // namespace

// Accumulates one tap at a time over bounded, branch-free inner loops.
// Per output element the additions still arrive in (ci, ky, kx) order, so
// the result is bit-identical to the naive reference loop. stride 2 reads
// through an even/odd deinterleave of the input rows to keep the inner
// loop contiguous for the vectorizer.
void conv2d_forward(const float* in, int c_in, int h, int w,
                    const float* wt, const float* bias, int c_out,
                    int stride, int pad, float* out, int oh, int ow) {
  const int even_len = (w + 1) / 2;
  std::vector<float> deint;
  if (stride == 2) {
    deint.resize(static_cast<size_t>(c_in) * h * w);
    for (int ci = 0; ci < c_in; ++ci)
      for (int iy = 0; iy < h; ++iy) {
        const float* src = in + (static_cast<long>(ci) * h + iy) * w;
        float* dst = deint.data() + (static_cast<long>(ci) * h + iy) * w;
        for (int j = 0; 2 * j < w; ++j) dst[j] = src[2 * j];
        for (int j = 0; 2 * j + 1 < w; ++j) dst[even_len + j] = src[2 * j + 1];
      }
  }

#pragma omp parallel for schedule(static)
  for (int co = 0; co < c_out; ++co) {
    float* oplane = out + static_cast<long>(co) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) oplane[i] = bias[co];
    for (int ci = 0; ci < c_in; ++ci) {
      const float* iplane = in + static_cast<long>(ci) * h * w;
      const float* dplane = stride == 2
                                ? deint.data() + static_cast<long>(ci) * h * w
                                : nullptr;
      const float* wk = wt + (static_cast<long>(co) * c_in + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        int oy_lo, oy_hi;
        tap_range(ky, stride, pad, h, oh, &oy_lo, &oy_hi);
        for (int kx = 0; kx < 3; ++kx) {
          int ox_lo, ox_hi;
          tap_range(kx, stride, pad, w, ow, &ox_lo, &ox_hi);
          if (ox_hi < ox_lo) continue;
          const float wv = wk[ky * 3 + kx];
          if (stride == 2) {
            // ix = 2*ox + t; phase and base index from t
            const int t = kx - pad;
            const int parity = ((t % 2) + 2) % 2;
            const int base = (t - parity) / 2;
            const int phase_off = parity == 0 ? 0 : even_len;
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const int iy = oy * 2 - pad + ky;
              const float* irow = dplane + static_cast<long>(iy) * w + phase_off + base;
              float* orow = oplane + static_cast<long>(oy) * ow;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * irow[ox];
            }
          } else {
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const int iy = oy * stride - pad + ky;
              const float* irow = iplane + static_cast<long>(iy) * w - pad + kx;
              float* orow = oplane + static_cast<long>(oy) * ow;
              for (int ox = ox_lo; ox <= ox_hi; ++ox)
                orow[ox] += wv * irow[static_cast<long>(ox) * stride];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const float* grad_out, const float* wt,
                           int c_in, int h, int w, int c_out,
                           int stride, int pad, float* grad_in,
                           int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ci = 0; ci < c_in; ++ci) {
    for (int y = 0; y < h; ++y) {
      float* grow = grad_in + (static_cast<long>(ci) * h + y) * w;
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int co = 0; co < c_out; ++co) {
          const float* gplane = grad_out + static_cast<long>(co) * oh * ow;
          const float* wk = wt + (static_cast<long>(co) * c_in + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int num_y = y + pad - ky;
            if (num_y < 0 || num_y % stride != 0) continue;
            const int oy = num_y / stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int num_x = x + pad - kx;
              if (num_x < 0 || num_x % stride != 0) continue;
              const int ox = num_x / stride;
              if (ox >= ow) continue;
              acc += wk[ky * 3 + kx] * gplane[oy * ow + ox];
            }
          }
        }
        grow[x] = acc;
      }
    }
  }
}

void conv2d_backward_weights(const float* grad_out, const float* in,
                             int c_in, int h, int w, int c_out,
                             int stride, int pad, float* grad_wt,
                             float* grad_bias, int oh, int ow) {
#pragma omp parallel for schedule(static)
  for (int co = 0; co < c_out; ++co) {
    const float* gplane = grad_out + static_cast<long>(co) * oh * ow;
    float gb = 0.0f;
    for (int i = 0; i < oh * ow; ++i) gb += gplane[i];
    grad_bias[co] = gb;
    for (int ci = 0; ci < c_in; ++ci) {
      const float* iplane = in + static_cast<long>(ci) * h * w;
      float* gw = grad_wt + (static_cast<long>(co) * c_in + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          float acc = 0.0f;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              acc += gplane[oy * ow + ox] * iplane[iy * w + ix];
            }
          }
          gw[ky * 3 + kx] = acc;
        }
      }
    }
  }
}

// Eight fixed accumulator lanes (lane = j mod 8, pairwise-combined), so
// the dot product vectorizes while the summation tree stays deterministic.
// evoclass::ref::dense_forward uses the identical tree.
void dense_forward(const float* x, const float* wt, const float* bias,
                   int out_n, int in_n, float* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < out_n; ++i) {
    const float* row = wt + static_cast<long>(i) * in_n;
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int j = 0;
    for (; j + 8 <= in_n; j += 8) {
      acc[0] += row[j] * x[j];
      acc[1] += row[j + 1] * x[j + 1];
      acc[2] += row[j + 2] * x[j + 2];
      acc[3] += row[j + 3] * x[j + 3];
      acc[4] += row[j + 4] * x[j + 4];
      acc[5] += row[j + 5] * x[j + 5];
      acc[6] += row[j + 6] * x[j + 6];
      acc[7] += row[j + 7] * x[j + 7];
    }
    for (; j < in_n; ++j) acc[j % 8] += row[j] * x[j];
    y[i] = bias[i] + (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                      ((acc[4] + acc[5]) + (acc[6] + acc[7])));
  }
}

void dense_backward_input(const float* grad_y, const float* wt,
                          int out_n, int in_n, float* grad_x) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < in_n; ++j) {
    float acc = 0.0f;
    for (int i = 0; i < out_n; ++i) acc += wt[static_cast<long>(i) * in_n + j] * grad_y[i];
    grad_x[j] = acc;
  }
}

void dense_backward_weights(const float* grad_y, const float* x,
                            int out_n, int in_n, float* grad_wt,
                            float* grad_bias) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < out_n; ++i) {
    const float g = grad_y[i];
    float* row = grad_wt + static_cast<long>(i) * in_n;
    for (int j = 0; j < in_n; ++j) row[j] = g * x[j];
    grad_bias[i] = g;
  }
}

void relu_forward(const float* x, int n, float* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* grad_y, const float* x, int n, float* grad_x) {
  for (int i = 0; i < n; ++i) grad_x[i] = x[i] > 0.0f ? grad_y[i] : 0.0f;
}

}  // namespace evoclass::kernels
