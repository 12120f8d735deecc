#pragma once

namespace evoclass::kernels {

// Raw-pointer kernels behind the Tensor ops and the model forward/backward
// paths. OpenMP-parallel over independent output elements.
//
// Per output element the reduction runs input-channel outer with the
// kernel window row-major innermost. The serial reference in
// evoclass::ref uses the identical order, so the two match bit for bit
// at any thread count.

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

void relu_forward(const float* x, int n, float* y);

// Subgradient at exactly 0 is 0.
void relu_backward(const float* grad_y, const float* x, int n, float* grad_x);

}  // namespace evoclass::kernels
