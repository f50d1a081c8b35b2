#include "fdavae/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace fdavae::kernels {

namespace {

// Valid output-x range [lo, hi) for a given kernel tap, so the inner loops
// never test image bounds: 0 <= ox*stride - pad + kx < in_w.
inline void ox_range(int in_w, int out_w, int stride, int pad, int kx, int& lo,
                     int& hi) {
  int lo_num = pad - kx;
  lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  int hi_num = in_w - 1 + pad - kx;
  hi = hi_num < 0 ? 0 : std::min(out_w, hi_num / stride + 1);
}

}  // namespace

void conv2d_forward(const Tensor& x, const Tensor& w, const float* bias,
                    int stride, int pad, Tensor& y) {
  const int batch = x.n, ci_n = x.c, in_h = x.h, in_w = x.w;
  const int co_n = w.n, k = w.h;
  const int out_h = y.h, out_w = y.w;

#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < batch; ++ni) {
    for (int co = 0; co < co_n; ++co) {
      float* yp = y.plane(ni, co);
      const float b = bias ? bias[co] : 0.0f;
      std::fill(yp, yp + static_cast<std::size_t>(out_h) * out_w, b);
      for (int ci = 0; ci < ci_n; ++ci) {
        const float* xp = x.plane(ni, ci);
        const float* wp = w.plane(co, ci);
        for (int oy = 0; oy < out_h; ++oy) {
          float* yrow = yp + static_cast<std::size_t>(oy) * out_w;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= in_h) continue;
            const float* xrow = xp + static_cast<std::size_t>(iy) * in_w;
            for (int kx = 0; kx < k; ++kx) {
              const float wv = wp[ky * k + kx];
              int lo, hi;
              ox_range(in_w, out_w, stride, pad, kx, lo, hi);
              const float* xs = xrow - pad + kx;
              if (stride == 1) {
                for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xs[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox)
                  yrow[ox] += wv * xs[ox * stride];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Tensor& dy, const Tensor& w, int stride,
                           int pad, Tensor& dx) {
  const int batch = dx.n, ci_n = dx.c, in_h = dx.h, in_w = dx.w;
  const int co_n = w.n, k = w.h;
  const int out_h = dy.h, out_w = dy.w;

#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < batch; ++ni) {
    for (int ci = 0; ci < ci_n; ++ci) {
      float* dxp = dx.plane(ni, ci);
      std::fill(dxp, dxp + static_cast<std::size_t>(in_h) * in_w, 0.0f);
      for (int co = 0; co < co_n; ++co) {
        const float* dyp = dy.plane(ni, co);
        const float* wp = w.plane(co, ci);
        for (int oy = 0; oy < out_h; ++oy) {
          const float* dyrow = dyp + static_cast<std::size_t>(oy) * out_w;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= in_h) continue;
            float* dxrow = dxp + static_cast<std::size_t>(iy) * in_w;
            for (int kx = 0; kx < k; ++kx) {
              const float wv = wp[ky * k + kx];
              int lo, hi;
              ox_range(in_w, out_w, stride, pad, kx, lo, hi);
              float* ds = dxrow - pad + kx;
              if (stride == 1) {
                for (int ox = lo; ox < hi; ++ox) ds[ox] += wv * dyrow[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox)
                  ds[ox * stride] += wv * dyrow[ox];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const Tensor& dy, const Tensor& x, int stride,
                            int pad, Tensor& dw, float* dbias) {
  const int batch = x.n, ci_n = x.c, in_h = x.h, in_w = x.w;
  const int co_n = dw.n, k = dw.h;
  const int out_h = dy.h, out_w = dy.w;

  // Each thread owns the dw/dbias slices of its own co values.
#pragma omp parallel for schedule(static)
  for (int co = 0; co < co_n; ++co) {
    if (dbias) {
      double acc = 0.0;
      for (int ni = 0; ni < batch; ++ni) {
        const float* dyp = dy.plane(ni, co);
        for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w;
             ++i)
          acc += dyp[i];
      }
      dbias[co] += static_cast<float>(acc);
    }
    for (int ni = 0; ni < batch; ++ni) {
      const float* dyp = dy.plane(ni, co);
      for (int ci = 0; ci < ci_n; ++ci) {
        const float* xp = x.plane(ni, ci);
        float* dwp = dw.plane(co, ci);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            int lo, hi;
            ox_range(in_w, out_w, stride, pad, kx, lo, hi);
            float acc = 0.0f;
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= in_h) continue;
              const float* dyrow = dyp + static_cast<std::size_t>(oy) * out_w;
              const float* xs =
                  xp + static_cast<std::size_t>(iy) * in_w - pad + kx;
              // simd reduction fixes the lane order per build, so results
              // stay identical run to run.
              if (stride == 1) {
#pragma omp simd reduction(+ : acc)
                for (int ox = lo; ox < hi; ++ox) acc += dyrow[ox] * xs[ox];
              } else {
#pragma omp simd reduction(+ : acc)
                for (int ox = lo; ox < hi; ++ox)
                  acc += dyrow[ox] * xs[ox * stride];
              }
            }
            dwp[ky * k + kx] += acc;
          }
        }
      }
    }
  }
}

void instance_norm_forward(const Tensor& x, const float* gamma,
                           const float* beta, float eps, Tensor& y,
                           std::vector<float>& mean,
                           std::vector<float>& inv_std) {
  const int batch = x.n, ch = x.c;
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  mean.resize(static_cast<std::size_t>(batch) * ch);
  inv_std.resize(static_cast<std::size_t>(batch) * ch);

#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < batch; ++ni) {
    for (int ci = 0; ci < ch; ++ci) {
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
      const float istd =
          1.0f / std::sqrt(static_cast<float>(v / static_cast<double>(hw)) + eps);
      mean[static_cast<std::size_t>(ni) * ch + ci] = m;
      inv_std[static_cast<std::size_t>(ni) * ch + ci] = istd;
      const float g = gamma[ci], b = beta[ci];
      for (std::size_t i = 0; i < hw; ++i) yp[i] = g * (xp[i] - m) * istd + b;
    }
  }
}

void instance_norm_backward(const Tensor& dy, const Tensor& x,
                            const float* gamma, const std::vector<float>& mean,
                            const std::vector<float>& inv_std, Tensor& dx,
                            float* dgamma, float* dbeta) {
  const int batch = x.n, ch = x.c;
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;

  // Parallel over channels: dgamma/dbeta entries stay thread-private.
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < ch; ++ci) {
    double dg = 0.0, db = 0.0;
    for (int ni = 0; ni < batch; ++ni) {
      const float* xp = x.plane(ni, ci);
      const float* dyp = dy.plane(ni, ci);
      float* dxp = dx.plane(ni, ci);
      const float m = mean[static_cast<std::size_t>(ni) * ch + ci];
      const float istd = inv_std[static_cast<std::size_t>(ni) * ch + ci];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const float xhat = (xp[i] - m) * istd;
        sum_dy += dyp[i];
        sum_dy_xhat += static_cast<double>(dyp[i]) * xhat;
      }
      dg += sum_dy_xhat;
      db += sum_dy;
      const float mean_dy = static_cast<float>(sum_dy / static_cast<double>(hw));
      const float mean_dy_xhat =
          static_cast<float>(sum_dy_xhat / static_cast<double>(hw));
      const float g_istd = gamma[ci] * istd;
      for (std::size_t i = 0; i < hw; ++i) {
        const float xhat = (xp[i] - m) * istd;
        dxp[i] = g_istd * (dyp[i] - mean_dy - xhat * mean_dy_xhat);
      }
    }
    dgamma[ci] += static_cast<float>(dg);
    dbeta[ci] += static_cast<float>(db);
  }
}

void leaky_relu_forward(const Tensor& x, float slope, Tensor& y) {
  const std::size_t len = x.size();
  const float* xp = x.data.data();
  float* yp = y.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    yp[i] = xp[i] > 0.0f ? xp[i] : slope * xp[i];
}

void leaky_relu_backward(const Tensor& dy, const Tensor& x, float slope,
                         Tensor& dx) {
  const std::size_t len = x.size();
  const float* xp = x.data.data();
  const float* dyp = dy.data.data();
  float* dxp = dx.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    dxp[i] = xp[i] > 0.0f ? dyp[i] : slope * dyp[i];
}

void tanh_forward(const Tensor& x, Tensor& y) {
  const std::size_t len = x.size();
  const float* xp = x.data.data();
  float* yp = y.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    yp[i] = std::tanh(xp[i]);
}

void tanh_backward(const Tensor& dy, const Tensor& y, Tensor& dx) {
  const std::size_t len = y.size();
  const float* yp = y.data.data();
  const float* dyp = dy.data.data();
  float* dxp = dx.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    dxp[i] = dyp[i] * (1.0f - yp[i] * yp[i]);
}

void upsample2x_forward(const Tensor& x, Tensor& y) {
  const int batch = x.n, ch = x.c, in_h = x.h, in_w = x.w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < batch; ++ni) {
    for (int ci = 0; ci < ch; ++ci) {
      const float* xp = x.plane(ni, ci);
      float* yp = y.plane(ni, ci);
      for (int iy = 0; iy < in_h; ++iy) {
        for (int ix = 0; ix < in_w; ++ix) {
          const float v = xp[static_cast<std::size_t>(iy) * in_w + ix];
          float* base = yp + (static_cast<std::size_t>(2 * iy) * (2 * in_w)) +
                        2 * ix;
          base[0] = v;
          base[1] = v;
          base[2 * in_w] = v;
          base[2 * in_w + 1] = v;
        }
      }
    }
  }
}

void upsample2x_backward(const Tensor& dy, Tensor& dx) {
  const int batch = dx.n, ch = dx.c, in_h = dx.h, in_w = dx.w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < batch; ++ni) {
    for (int ci = 0; ci < ch; ++ci) {
      const float* dyp = dy.plane(ni, ci);
      float* dxp = dx.plane(ni, ci);
      for (int iy = 0; iy < in_h; ++iy) {
        for (int ix = 0; ix < in_w; ++ix) {
          const float* base =
              dyp + (static_cast<std::size_t>(2 * iy) * (2 * in_w)) + 2 * ix;
          dxp[static_cast<std::size_t>(iy) * in_w + ix] =
              base[0] + base[1] + base[2 * in_w] + base[2 * in_w + 1];
        }
      }
    }
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0f) {
      std::fill(crow, crow + n, 0.0f);
    } else if (beta != 1.0f) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int p = 0; p < k; ++p) {
      const float av =
          alpha * (trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                           : a[static_cast<std::size_t>(i) * lda + p]);
      if (av == 0.0f) continue;
      if (!trans_b) {
        const float* brow = b + static_cast<std::size_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        const float* bcol = b + p;
        for (int j = 0; j < n; ++j)
          crow[j] += av * bcol[static_cast<std::size_t>(j) * ldb];
      }
    }
  }
}

void softmax_rows(float* mat, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    float* row = mat + static_cast<std::size_t>(i) * cols;
    float mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    const float inv = static_cast<float>(1.0 / s);
    for (int j = 0; j < cols; ++j) row[j] *= inv;
  }
}

void softmax_backward_rows(const float* soft, const float* dsoft, int rows,
                           int cols, float* dscores) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const float* s = soft + static_cast<std::size_t>(i) * cols;
    const float* d = dsoft + static_cast<std::size_t>(i) * cols;
    float* out = dscores + static_cast<std::size_t>(i) * cols;
    double dot = 0.0;
    for (int j = 0; j < cols; ++j) dot += static_cast<double>(d[j]) * s[j];
    const float dotf = static_cast<float>(dot);
    for (int j = 0; j < cols; ++j) out[j] = s[j] * (d[j] - dotf);
  }
}

void axpy(std::size_t len, float a, const float* x, float* y) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    y[i] += a * x[i];
}

void scale(std::size_t len, float a, float* x) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(len); ++i)
    x[i] *= a;
}

double sum(const float* x, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += x[i];
  return s;
}

double sum_abs(const float* x, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += std::fabs(x[i]);
  return s;
}

double sum_abs_diff(const float* a, const float* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i)
    s += std::fabs(static_cast<double>(a[i]) - b[i]);
  return s;
}

double sum_sq_diff(const float* a, const float* b, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace fdavae::kernels
