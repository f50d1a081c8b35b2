#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace fdavae {

// Dense row-major 4-D tensor laid out as (N, C, H, W).
// Convolution weights reuse the same storage as (c_out, c_in, kh, kw).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  static Tensor like(const Tensor& t) { return Tensor(t.n, t.c, t.h, t.w); }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  // Pointer to the (ni, ci) spatial plane.
  float* plane(int ni, int ci) {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }
  const float* plane(int ni, int ci) const {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }

  float& at(int ni, int ci, int yi, int xi) {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
  }
  float at(int ni, int ci, int yi, int xi) const {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0f); }
  void fill(float v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace fdavae
