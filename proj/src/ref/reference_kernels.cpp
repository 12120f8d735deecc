#include "evoclass/reference_kernels.hpp"

namespace evoclass::ref {

void conv2d_forward(const float* in, int c_in, int h, int w,
                    const float* wt, const float* bias, int c_out,
                    int stride, int pad, float* out, int oh, int ow) {
  for (int co = 0; co < c_out; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float acc = bias[co];
        for (int ci = 0; ci < c_in; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              acc += wt[((static_cast<long>(co) * c_in + ci) * 3 + ky) * 3 + kx] *
                     in[(static_cast<long>(ci) * h + iy) * w + ix];
            }
          }
        }
        out[(static_cast<long>(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(const float* grad_out, const float* wt,
                           int c_in, int h, int w, int c_out,
                           int stride, int pad, float* grad_in,
                           int oh, int ow) {
  for (int ci = 0; ci < c_in; ++ci) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int co = 0; co < c_out; ++co) {
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
              acc += wt[((static_cast<long>(co) * c_in + ci) * 3 + ky) * 3 + kx] *
                     grad_out[(static_cast<long>(co) * oh + oy) * ow + ox];
            }
          }
        }
        grad_in[(static_cast<long>(ci) * h + y) * w + x] = acc;
      }
    }
  }
}

void conv2d_backward_weights(const float* grad_out, const float* in,
                             int c_in, int h, int w, int c_out,
                             int stride, int pad, float* grad_wt,
                             float* grad_bias, int oh, int ow) {
  for (int co = 0; co < c_out; ++co) {
    float gb = 0.0f;
    for (int i = 0; i < oh * ow; ++i) gb += grad_out[static_cast<long>(co) * oh * ow + i];
    grad_bias[co] = gb;
    for (int ci = 0; ci < c_in; ++ci) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          float acc = 0.0f;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              acc += grad_out[(static_cast<long>(co) * oh + oy) * ow + ox] *
                     in[(static_cast<long>(ci) * h + iy) * w + ix];
            }
          }
          grad_wt[((static_cast<long>(co) * c_in + ci) * 3 + ky) * 3 + kx] = acc;
        }
      }
    }
  }
}

// Same eight-lane accumulator tree as evoclass::kernels::dense_forward.
void dense_forward(const float* x, const float* wt, const float* bias,
                   int out_n, int in_n, float* y) {
  for (int i = 0; i < out_n; ++i) {
    const float* row = wt + static_cast<long>(i) * in_n;
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int j = 0;
    for (; j + 8 <= in_n; j += 8) {
      for (int k = 0; k < 8; ++k) acc[k] += row[j + k] * x[j + k];
    }
    for (; j < in_n; ++j) acc[j % 8] += row[j] * x[j];
    y[i] = bias[i] + (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                      ((acc[4] + acc[5]) + (acc[6] + acc[7])));
  }
}

void dense_backward_input(const float* grad_y, const float* wt,
                          int out_n, int in_n, float* grad_x) {
  for (int j = 0; j < in_n; ++j) {
    float acc = 0.0f;
    for (int i = 0; i < out_n; ++i) acc += wt[static_cast<long>(i) * in_n + j] * grad_y[i];
    grad_x[j] = acc;
  }
}

void dense_backward_weights(const float* grad_y, const float* x,
                            int out_n, int in_n, float* grad_wt,
                            float* grad_bias) {
  for (int i = 0; i < out_n; ++i) {
    for (int j = 0; j < in_n; ++j) grad_wt[static_cast<long>(i) * in_n + j] = grad_y[i] * x[j];
    grad_bias[i] = grad_y[i];
  }
}

}  // namespace evoclass::ref
