#pragma once

#include <vector>

#include "fdavae/tensor.hpp"

// OpenMP-parallel compute kernels. Every parallel loop owns a disjoint slice
// of the output, so results are bitwise independent of the thread count.
// Serial textbook versions of the hot kernels live in fdavae::ref
// (kernels_ref.hpp) and are used by the tests and the benchmark.
namespace fdavae::kernels {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// y = conv(x, w) + bias. x: (N,Ci,H,W), w: (Co,Ci,K,K), bias: Co or null.
// y must be preallocated to (N,Co,Ho,Wo).
void conv2d_forward(const Tensor& x, const Tensor& w, const float* bias,
                    int stride, int pad, Tensor& y);

// dx (preallocated, overwritten) from dy and w.
void conv2d_backward_input(const Tensor& dy, const Tensor& w, int stride,
                           int pad, Tensor& dx);

// Accumulates into dw and dbias (dbias may be null).
void conv2d_backward_params(const Tensor& dy, const Tensor& x, int stride,
                            int pad, Tensor& dw, float* dbias);

// Per-(sample, channel) normalization with affine transform.
// mean/inv_std are resized to N*C and filled for the backward pass.
void instance_norm_forward(const Tensor& x, const float* gamma,
                           const float* beta, float eps, Tensor& y,
                           std::vector<float>& mean,
                           std::vector<float>& inv_std);

// dgamma/dbeta accumulated; dx overwritten.
void instance_norm_backward(const Tensor& dy, const Tensor& x,
                            const float* gamma, const std::vector<float>& mean,
                            const std::vector<float>& inv_std, Tensor& dx,
                            float* dgamma, float* dbeta);

void leaky_relu_forward(const Tensor& x, float slope, Tensor& y);
void leaky_relu_backward(const Tensor& dy, const Tensor& x, float slope,
                         Tensor& dx);

void tanh_forward(const Tensor& x, Tensor& y);
// Takes the forward output (not the input).
void tanh_backward(const Tensor& dy, const Tensor& y, Tensor& dx);

// Nearest-neighbour 2x upsampling.
void upsample2x_forward(const Tensor& x, Tensor& y);
void upsample2x_backward(const Tensor& dy, Tensor& dx);

// c = alpha * op(a) * op(b) + beta * c, row-major.
// op(a) is (m,k), op(b) is (k,n), c is (m,n) with leading dimension ldc.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);

// In-place row-wise softmax on an (rows, cols) matrix.
void softmax_rows(float* mat, int rows, int cols);

// dscores from the softmax output `soft` and upstream `dsoft` (row-wise).
void softmax_backward_rows(const float* soft, const float* dsoft, int rows,
                           int cols, float* dscores);

// y += x, y = a*x + y style helpers.
void axpy(std::size_t len, float a, const float* x, float* y);
void scale(std::size_t len, float a, float* x);

// Deterministic reductions (serial double accumulation).
double sum(const float* x, std::size_t len);
double sum_abs(const float* x, std::size_t len);
double sum_abs_diff(const float* a, const float* b, std::size_t len);
double sum_sq_diff(const float* a, const float* b, std::size_t len);

}  // namespace fdavae::kernels
