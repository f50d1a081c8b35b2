#pragma once

#include <vector>

#include "fdavae/tensor.hpp"

// Serial textbook implementations of the hot kernels. Kept as the reference
// the parallel versions are tested against, and as the baseline side of the
// kernel benchmark. Not used by the library itself.
namespace fdavae::ref {

void conv2d_forward(const Tensor& x, const Tensor& w, const float* bias,
                    int stride, int pad, Tensor& y);

void conv2d_backward_input(const Tensor& dy, const Tensor& w, int stride,
                           int pad, Tensor& dx);

void conv2d_backward_params(const Tensor& dy, const Tensor& x, int stride,
                            int pad, Tensor& dw, float* dbias);

void instance_norm_forward(const Tensor& x, const float* gamma,
                           const float* beta, float eps, Tensor& y,
                           std::vector<float>& mean,
                           std::vector<float>& inv_std);

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);

}  // namespace fdavae::ref
