#include "fdavae/kernels_ref.hpp"

#include <cmath>

namespace fdavae::ref {

void conv2d_forward(const Tensor& x, const Tensor& w, const float* bias,
                    int stride, int pad, Tensor& y) {
  for (int ni = 0; ni < y.n; ++ni)
    for (int co = 0; co < y.c; ++co)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          double acc = bias ? bias[co] : 0.0;
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < w.h; ++ky)
              for (int kx = 0; kx < w.w; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += static_cast<double>(w.at(co, ci, ky, kx)) *
                       x.at(ni, ci, iy, ix);
              }
          y.at(ni, co, oy, ox) = static_cast<float>(acc);
        }
}

void conv2d_backward_input(const Tensor& dy, const Tensor& w, int stride,
                           int pad, Tensor& dx) {
  dx.zero();
  for (int ni = 0; ni < dy.n; ++ni)
    for (int co = 0; co < dy.c; ++co)
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const float g = dy.at(ni, co, oy, ox);
          for (int ci = 0; ci < dx.c; ++ci)
            for (int ky = 0; ky < w.h; ++ky)
              for (int kx = 0; kx < w.w; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= dx.h || ix < 0 || ix >= dx.w) continue;
                dx.at(ni, ci, iy, ix) += w.at(co, ci, ky, kx) * g;
              }
        }
}

void conv2d_backward_params(const Tensor& dy, const Tensor& x, int stride,
                            int pad, Tensor& dw, float* dbias) {
  for (int ni = 0; ni < dy.n; ++ni)
    for (int co = 0; co < dy.c; ++co)
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const float g = dy.at(ni, co, oy, ox);
          if (dbias) dbias[co] += g;
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < dw.h; ++ky)
              for (int kx = 0; kx < dw.w; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                dw.at(co, ci, ky, kx) += x.at(ni, ci, iy, ix) * g;
              }
        }
}

void instance_norm_forward(const Tensor& x, const float* gamma,
                           const float* beta, float eps, Tensor& y,
                           std::vector<float>& mean,
                           std::vector<float>& inv_std) {
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  mean.assign(static_cast<std::size_t>(x.n) * x.c, 0.0f);
  inv_std.assign(static_cast<std::size_t>(x.n) * x.c, 0.0f);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const float* xp = x.plane(ni, ci);
      float* yp = y.plane(ni, ci);
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += xp[i];
      const float m = static_cast<float>(s / static_cast<double>(hw));
      double v = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = xp[i] - m;
        v += d * d;
      }
      const float istd = 1.0f / std::sqrt(static_cast<float>(
                                    v / static_cast<double>(hw)) + eps);
      mean[static_cast<std::size_t>(ni) * x.c + ci] = m;
      inv_std[static_cast<std::size_t>(ni) * x.c + ci] = istd;
      for (std::size_t i = 0; i < hw; ++i)
        yp[i] = gamma[ci] * (xp[i] - m) * istd + beta[ci];
    }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const float av = trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                                 : a[static_cast<std::size_t>(i) * lda + p];
        const float bv = trans_b ? b[static_cast<std::size_t>(j) * ldb + p]
                                 : b[static_cast<std::size_t>(p) * ldb + j];
        acc += static_cast<double>(av) * bv;
      }
      float* cv = c + static_cast<std::size_t>(i) * ldc + j;
      *cv = alpha * static_cast<float>(acc) + beta * *cv;
    }
}

}  // namespace fdavae::ref
