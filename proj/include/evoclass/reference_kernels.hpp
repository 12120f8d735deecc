#pragma once

namespace evoclass::ref {

// Serial reference kernels: plain nested loops, no pragmas, same
// per-element summation order as evoclass::kernels. Kept for oracle
// tests and for the benchmark target; never linked into the CLI.

void conv2d_forward(const float* in, int c_in, int h, int w,
                    const float* wt, const float* bias, int c_out,
                    int stride, int pad, float* out, int oh, int ow);

void conv2d_backward_input(const float* grad_out, const float* wt,
                           int c_in, int h, int w, int c_out,
                           int stride, int pad, float* grad_in,
                           int oh, int ow);

void conv2d_backward_weights(const float* grad_out, const float* in,
                             int c_in, int h, int w, int c_out,
                             int stride, int pad, float* grad_wt,
                             float* grad_bias, int oh, int ow);

void dense_forward(const float* x, const float* wt, const float* bias,
                   int out_n, int in_n, float* y);

void dense_backward_input(const float* grad_y, const float* wt,
                          int out_n, int in_n, float* grad_x);

void dense_backward_weights(const float* grad_y, const float* x,
                            int out_n, int in_n, float* grad_wt,
                            float* grad_bias);

}  // namespace evoclass::ref
