#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fdavae/kernels.hpp"
#include "fdavae/rng.hpp"
#include "fdavae/tensor.hpp"

namespace fdavae {

// Named view of a trainable tensor and its gradient buffer.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// A differentiable block. forward(x, cache=true) stores whatever the next
// backward needs; backward accumulates parameter gradients and returns the
// input gradient. With cache=false forward touches no member state, so
// inference can run concurrently on shared parameters.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool cache) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamRef>& out) {}
};

class Conv2d : public Layer {
 public:
  // He-normal init from `rng`. Blocks that feed a normalization layer set
  // use_bias=false (a bias before instance norm is cancelled by the mean
  // subtraction and would never receive gradient).
  Conv2d(int c_in, int c_out, int k, int stride, int pad, bool use_bias,
         RngStream& rng);

  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;

  int out_dim_h(int in_h) const {
    return kernels::conv_out_dim(in_h, k_, stride_, pad_);
  }

  Tensor weight, weight_grad;
  Tensor bias, bias_grad;  // shape (1,1,1,c_out) when use_bias

 private:
  int c_in_, c_out_, k_, stride_, pad_;
  bool use_bias_;
  Tensor x_;
};

class InstanceNorm2d : public Layer {
 public:
  explicit InstanceNorm2d(int channels, float eps = 1e-5f);

  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;

  Tensor gamma, gamma_grad;
  Tensor beta, beta_grad;

 private:
  int channels_;
  float eps_;
  Tensor x_;
  std::vector<float> mean_, inv_std_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;

 private:
  float slope_;
  Tensor x_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

class Upsample2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int in_h_ = 0, in_w_ = 0, n_ = 0, c_ = 0;
};

// conv-norm-act, conv-norm, residual add, act.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(int channels, RngStream& rng);
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;

 private:
  Conv2d conv1_, conv2_;
  InstanceNorm2d norm1_, norm2_;
  LeakyReLU act1_, act_out_;
};

// Embedded-Gaussian non-local block with residual connection:
//   y_i = x_i + W_out( sum_j softmax_j(theta(x)_i . phi(x)_j) g(x)_j )
// theta/phi/g are 1x1 projections to channels/2. phi and theta carry no bias:
// a phi bias only shifts every score in a row by the same amount, which the
// softmax ignores.
class NonLocalAttention : public Layer {
 public:
  NonLocalAttention(int channels, RngStream& rng);
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;

  // Row-stochastic attention matrix of the last cached forward, one (P x P)
  // block per sample. Exposed for diagnostics and tests.
  const std::vector<float>& last_attention() const { return attn_; }

  Conv2d theta_, phi_, g_, out_;

 private:
  int channels_, inter_;
  Tensor x_, t_, p_, gf_, att_feat_;
  std::vector<float> attn_;
};

// Straight-line chain of layers.
class Sequential : public Layer {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L* emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    names_.push_back("");
    return raw;
  }

  // Name used as the parameter prefix for the most recently added layer.
  void name_last(const std::string& name) { names_.back() = name; }

  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef>& out) override;

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> names_;
};

// Adam with bias correction over a fixed parameter registry.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  long t() const { return t_; }
  const std::vector<ParamRef>& params() const { return params_; }
  // Moment buffers in registry order, for checkpointing.
  std::vector<Tensor>& moments_m() { return m_; }
  std::vector<Tensor>& moments_v() { return v_; }
  void set_t(long t) { t_ = t; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Tensor> m_, v_;
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace fdavae
