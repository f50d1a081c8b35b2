#include "fdavae/layers.hpp"

#include <cmath>

#include "fdavae/errors.hpp"

namespace fdavae {

namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.n) + "," + std::to_string(t.c) + "," +
         std::to_string(t.h) + "," + std::to_string(t.w) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int c_in, int c_out, int k, int stride, int pad, bool use_bias,
               RngStream& rng)
    : weight(c_out, c_in, k, k),
      weight_grad(c_out, c_in, k, k),
      c_in_(c_in), c_out_(c_out), k_(k), stride_(stride), pad_(pad),
      use_bias_(use_bias) {
  const double std_dev = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
  for (auto& v : weight.data) v = static_cast<float>(rng.normal(0.0, std_dev));
  if (use_bias_) {
    bias = Tensor(1, 1, 1, c_out);
    bias_grad = Tensor(1, 1, 1, c_out);
  }
}

Tensor Conv2d::forward(const Tensor& x, bool cache) {
  if (x.c != c_in_)
    throw ShapeError("conv2d: expected " + std::to_string(c_in_) +
                     " input channels, got " + shape_str(x));
  Tensor y(x.n, c_out_, kernels::conv_out_dim(x.h, k_, stride_, pad_),
           kernels::conv_out_dim(x.w, k_, stride_, pad_));
  kernels::conv2d_forward(x, weight, use_bias_ ? bias.data.data() : nullptr,
                          stride_, pad_, y);
  if (cache) x_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  kernels::conv2d_backward_params(dy, x_, stride_, pad_, weight_grad,
                                  use_bias_ ? bias_grad.data.data() : nullptr);
  Tensor dx = Tensor::like(x_);
  kernels::conv2d_backward_input(dy, weight, stride_, pad_, dx);
  return dx;
}

void Conv2d::collect_params(const std::string& prefix,
                            std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &weight, &weight_grad});
  if (use_bias_) out.push_back({prefix + ".b", &bias, &bias_grad});
}

// ---------------------------------------------------------------------------
// InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(int channels, float eps)
    : gamma(1, 1, 1, channels),
      gamma_grad(1, 1, 1, channels),
      beta(1, 1, 1, channels),
      beta_grad(1, 1, 1, channels),
      channels_(channels),
      eps_(eps) {
  gamma.fill(1.0f);
}

Tensor InstanceNorm2d::forward(const Tensor& x, bool cache) {
  if (x.c != channels_)
    throw ShapeError("instance_norm: expected " + std::to_string(channels_) +
                     " channels, got " + shape_str(x));
  Tensor y = Tensor::like(x);
  if (cache) {
    kernels::instance_norm_forward(x, gamma.data.data(), beta.data.data(),
                                   eps_, y, mean_, inv_std_);
    x_ = x;
  } else {
    std::vector<float> mean, inv_std;
    kernels::instance_norm_forward(x, gamma.data.data(), beta.data.data(),
                                   eps_, y, mean, inv_std);
  }
  return y;
}

Tensor InstanceNorm2d::backward(const Tensor& dy) {
  Tensor dx = Tensor::like(x_);
  kernels::instance_norm_backward(dy, x_, gamma.data.data(), mean_, inv_std_,
                                  dx, gamma_grad.data.data(),
                                  beta_grad.data.data());
  return dx;
}

void InstanceNorm2d::collect_params(const std::string& prefix,
                                    std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma, &gamma_grad});
  out.push_back({prefix + ".beta", &beta, &beta_grad});
}

// ---------------------------------------------------------------------------
// Pointwise layers

Tensor LeakyReLU::forward(const Tensor& x, bool cache) {
  Tensor y = Tensor::like(x);
  kernels::leaky_relu_forward(x, slope_, y);
  if (cache) x_ = x;
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  Tensor dx = Tensor::like(x_);
  kernels::leaky_relu_backward(dy, x_, slope_, dx);
  return dx;
}

Tensor Tanh::forward(const Tensor& x, bool cache) {
  Tensor y = Tensor::like(x);
  kernels::tanh_forward(x, y);
  if (cache) y_ = y;
  return y;
}

Tensor Tanh::backward(const Tensor& dy) {
  Tensor dx = Tensor::like(y_);
  kernels::tanh_backward(dy, y_, dx);
  return dx;
}

Tensor Upsample2x::forward(const Tensor& x, bool cache) {
  Tensor y(x.n, x.c, 2 * x.h, 2 * x.w);
  kernels::upsample2x_forward(x, y);
  if (cache) {
    n_ = x.n;
    c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
  }
  return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
  Tensor dx(n_, c_, in_h_, in_w_);
  kernels::upsample2x_backward(dy, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// ResidualBlock

ResidualBlock::ResidualBlock(int channels, RngStream& rng)
    : conv1_(channels, channels, 3, 1, 1, false, rng),
      conv2_(channels, channels, 3, 1, 1, false, rng),
      norm1_(channels),
      norm2_(channels) {}

Tensor ResidualBlock::forward(const Tensor& x, bool cache) {
  Tensor h = conv1_.forward(x, cache);
  h = norm1_.forward(h, cache);
  h = act1_.forward(h, cache);
  h = conv2_.forward(h, cache);
  h = norm2_.forward(h, cache);
  kernels::axpy(h.size(), 1.0f, x.data.data(), h.data.data());
  return act_out_.forward(h, cache);
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor ds = act_out_.backward(dy);
  Tensor dh = norm2_.backward(ds);
  dh = conv2_.backward(dh);
  dh = act1_.backward(dh);
  dh = norm1_.backward(dh);
  Tensor dx = conv1_.backward(dh);
  kernels::axpy(dx.size(), 1.0f, ds.data.data(), dx.data.data());
  return dx;
}

void ResidualBlock::collect_params(const std::string& prefix,
                                   std::vector<ParamRef>& out) {
  conv1_.collect_params(prefix + ".conv1", out);
  norm1_.collect_params(prefix + ".norm1", out);
  conv2_.collect_params(prefix + ".conv2", out);
  norm2_.collect_params(prefix + ".norm2", out);
}

// ---------------------------------------------------------------------------
// NonLocalAttention

NonLocalAttention::NonLocalAttention(int channels, RngStream& rng)
    : theta_(channels, channels / 2, 1, 1, 0, false, rng),
      phi_(channels, channels / 2, 1, 1, 0, false, rng),
      g_(channels, channels / 2, 1, 1, 0, false, rng),
      out_(channels / 2, channels, 1, 1, 0, true, rng),
      channels_(channels),
      inter_(channels / 2) {}

Tensor NonLocalAttention::forward(const Tensor& x, bool cache) {
  Tensor t = theta_.forward(x, cache);
  Tensor p = phi_.forward(x, cache);
  Tensor gf = g_.forward(x, cache);

  const int batch = x.n;
  const int positions = x.h * x.w;
  std::vector<float> attn(static_cast<std::size_t>(batch) * positions *
                          positions);
  Tensor att_feat(batch, inter_, x.h, x.w);

  for (int ni = 0; ni < batch; ++ni) {
    float* a = attn.data() +
               static_cast<std::size_t>(ni) * positions * positions;
    // scores[i][j] = theta_i . phi_j; per-plane layout is (channel, position),
    // so this is t^T p.
    kernels::gemm(true, false, positions, positions, inter_, 1.0f,
                  t.plane(ni, 0), positions, p.plane(ni, 0), positions, 0.0f,
                  a, positions);
    kernels::softmax_rows(a, positions, positions);
    // att_feat[c][i] = sum_j attn[i][j] g[c][j]
    kernels::gemm(false, true, inter_, positions, positions, 1.0f,
                  gf.plane(ni, 0), positions, a, positions, 0.0f,
                  att_feat.plane(ni, 0), positions);
  }

  Tensor z = out_.forward(att_feat, cache);
  kernels::axpy(z.size(), 1.0f, x.data.data(), z.data.data());

  if (cache) {
    x_ = x;
    t_ = std::move(t);
    p_ = std::move(p);
    gf_ = std::move(gf);
    att_feat_ = std::move(att_feat);
    attn_ = std::move(attn);
  }
  return z;
}

Tensor NonLocalAttention::backward(const Tensor& dy) {
  const int batch = x_.n;
  const int positions = x_.h * x_.w;

  Tensor d_att_feat = out_.backward(dy);

  Tensor dt(batch, inter_, x_.h, x_.w);
  Tensor dp(batch, inter_, x_.h, x_.w);
  Tensor dg(batch, inter_, x_.h, x_.w);

  std::vector<float> dattn(static_cast<std::size_t>(positions) * positions);
  std::vector<float> dscores(static_cast<std::size_t>(positions) * positions);
  for (int ni = 0; ni < batch; ++ni) {
    const float* a = attn_.data() +
                     static_cast<std::size_t>(ni) * positions * positions;
    // dattn[i][j] = sum_c d_att_feat[c][i] g[c][j]
    kernels::gemm(true, false, positions, positions, inter_, 1.0f,
                  d_att_feat.plane(ni, 0), positions, gf_.plane(ni, 0),
                  positions, 0.0f, dattn.data(), positions);
    // dg[c][j] = sum_i d_att_feat[c][i] attn[i][j]
    kernels::gemm(false, false, inter_, positions, positions, 1.0f,
                  d_att_feat.plane(ni, 0), positions, a, positions, 0.0f,
                  dg.plane(ni, 0), positions);
    kernels::softmax_backward_rows(a, dattn.data(), positions, positions,
                                   dscores.data());
    // dt[c][i] = sum_j dscores[i][j] phi[c][j]
    kernels::gemm(false, true, inter_, positions, positions, 1.0f,
                  p_.plane(ni, 0), positions, dscores.data(), positions, 0.0f,
                  dt.plane(ni, 0), positions);
    // dp[c][j] = sum_i dscores[i][j] theta[c][i]
    kernels::gemm(false, false, inter_, positions, positions, 1.0f,
                  t_.plane(ni, 0), positions, dscores.data(), positions, 0.0f,
                  dp.plane(ni, 0), positions);
  }

  Tensor dx = theta_.backward(dt);
  Tensor dx_phi = phi_.backward(dp);
  Tensor dx_g = g_.backward(dg);
  kernels::axpy(dx.size(), 1.0f, dx_phi.data.data(), dx.data.data());
  kernels::axpy(dx.size(), 1.0f, dx_g.data.data(), dx.data.data());
  kernels::axpy(dx.size(), 1.0f, dy.data.data(), dx.data.data());
  return dx;
}

void NonLocalAttention::collect_params(const std::string& prefix,
                                       std::vector<ParamRef>& out) {
  theta_.collect_params(prefix + ".theta", out);
  phi_.collect_params(prefix + ".phi", out);
  g_.collect_params(prefix + ".g", out);
  out_.collect_params(prefix + ".out", out);
}

// ---------------------------------------------------------------------------
// Sequential

Tensor Sequential::forward(const Tensor& x, bool cache) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, cache);
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return g;
}

void Sequential::collect_params(const std::string& prefix,
                                std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string name =
        names_[i].empty() ? "l" + std::to_string(i) : names_[i];
    layers_[i]->collect_params(prefix + "." + name, out);
  }
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::like(*p.value));
    v_.push_back(Tensor::like(*p.value));
  }
}

void Adam::step() {
  ++t_;
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float corr1 = static_cast<float>(1.0 - std::pow(beta1_, t_));
  const float corr2 = static_cast<float>(1.0 - std::pow(beta2_, t_));
  const float lr = static_cast<float>(lr_);
  const float eps = static_cast<float>(eps_);
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    float* w = params_[pi].value->data.data();
    const float* g = params_[pi].grad->data.data();
    float* m = m_[pi].data.data();
    float* v = v_[pi].data.data();
    const std::ptrdiff_t len =
        static_cast<std::ptrdiff_t>(params_[pi].value->size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < len; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const float mhat = m[i] / corr1;
      const float vhat = v[i] / corr2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.grad->zero();
}

}  // namespace fdavae
