#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "fdavae/layers.hpp"
#include "fdavae/tensor.hpp"

namespace fdavae {

// Coefficients of the weighted total objective. The translation term always
// carries weight 1.
struct LossWeights {
  double lambda_rec = 1e-2;
  double lambda_gan = 1e-2;
  double lambda_perce = 1e-2;
  double lambda_fda = 1e-2;
  double lambda_kl = 1e-7;
};

struct LossBreakdown {
  double rec = 0, trans = 0, gan = 0, perce = 0, kl = 0, fda = 0, total = 0;
};

// KL(N(mu, sigma^2) || N(0, 1)) with sigma^2 = exp(log_var), elementwise
// 0.5*(mu^2 + sigma^2 - log sigma^2 - 1), reduced by mean over all elements.
template <typename T>
T kl_to_standard_normal(std::span<const T> mean, std::span<const T> log_var) {
  T acc = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const T var = std::exp(log_var[i]);
    acc += T(0.5) * (mean[i] * mean[i] + var - log_var[i] - T(1));
  }
  return acc / static_cast<T>(mean.size());
}

// Accumulates weight * d(KL)/d(mean), weight * d(KL)/d(log_var).
template <typename T>
void kl_to_standard_normal_grad(std::span<const T> mean,
                                std::span<const T> log_var, T weight,
                                std::span<T> d_mean, std::span<T> d_log_var) {
  const T inv_n = weight / static_cast<T>(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    d_mean[i] += inv_n * mean[i];
    d_log_var[i] += inv_n * T(0.5) * (std::exp(log_var[i]) - T(1));
  }
}

template <typename T>
struct FdaTerms {
  T mu_term = 0;   // mean |mu_a + mu_b|
  T var_term = 0;  // mean |sigma_a^2 - sigma_b^2|
  T sum() const { return mu_term + var_term; }
};

// The flip-alignment penalty: mean |mu_a + mu_b| + mean |var_a - var_b|.
// Zero exactly when the two latent Gaussians are mirror images about the
// standard normal.
template <typename T>
FdaTerms<T> fda_terms(std::span<const T> mean_a, std::span<const T> log_var_a,
                      std::span<const T> mean_b, std::span<const T> log_var_b) {
  FdaTerms<T> terms;
  for (std::size_t i = 0; i < mean_a.size(); ++i) {
    terms.mu_term += std::abs(mean_a[i] + mean_b[i]);
    terms.var_term += std::abs(std::exp(log_var_a[i]) - std::exp(log_var_b[i]));
  }
  terms.mu_term /= static_cast<T>(mean_a.size());
  terms.var_term /= static_cast<T>(mean_a.size());
  return terms;
}

template <typename T>
T fda_loss_span(std::span<const T> mean_a, std::span<const T> log_var_a,
                std::span<const T> mean_b, std::span<const T> log_var_b) {
  return fda_terms(mean_a, log_var_a, mean_b, log_var_b).sum();
}

// Subgradient convention: sign(0) = 0.
template <typename T>
void fda_loss_grad(std::span<const T> mean_a, std::span<const T> log_var_a,
                   std::span<const T> mean_b, std::span<const T> log_var_b,
                   T weight, std::span<T> d_mean_a, std::span<T> d_log_var_a,
                   std::span<T> d_mean_b, std::span<T> d_log_var_b) {
  const T inv_n = weight / static_cast<T>(mean_a.size());
  for (std::size_t i = 0; i < mean_a.size(); ++i) {
    const T ms = mean_a[i] + mean_b[i];
    const T s_mu = ms > T(0) ? T(1) : (ms < T(0) ? T(-1) : T(0));
    d_mean_a[i] += inv_n * s_mu;
    d_mean_b[i] += inv_n * s_mu;
    const T va = std::exp(log_var_a[i]);
    const T vb = std::exp(log_var_b[i]);
    const T vd = va - vb;
    const T s_var = vd > T(0) ? T(1) : (vd < T(0) ? T(-1) : T(0));
    d_log_var_a[i] += inv_n * s_var * va;
    d_log_var_b[i] -= inv_n * s_var * vb;
  }
}

// Mean absolute elementwise difference.
double l1_loss(const Tensor& prediction, const Tensor& target);
// Accumulates weight * d(l1)/d(prediction).
void l1_loss_grad(const Tensor& prediction, const Tensor& target,
                  float weight, Tensor& d_prediction);

// Least-squares GAN terms on patch-logit maps.
double gan_loss_generator(const Tensor& fake_logits);
void gan_loss_generator_grad(const Tensor& fake_logits, float weight,
                             Tensor& d_logits);
double gan_loss_discriminator(const Tensor& real_logits,
                              const Tensor& fake_logits);
// Gradients for the two halves, usable in separate backward passes.
void gan_loss_discriminator_grad_real(const Tensor& real_logits, float weight,
                                      Tensor& d_logits);
void gan_loss_discriminator_grad_fake(const Tensor& fake_logits, float weight,
                                      Tensor& d_logits);

// Perceptual distance in the feature space of a fixed convolutional stack.
// The default stack is randomly initialized from a recorded seed and never
// trained; a pretrained extractor can be plugged in behind this interface.
class FeatureDistance {
 public:
  virtual ~FeatureDistance() = default;
  virtual double distance(const Tensor& a, const Tensor& b) const = 0;
  // Accumulates weight * d(distance)/d(prediction) into d_prediction.
  virtual double distance_with_grad(const Tensor& prediction,
                                    const Tensor& target, float weight,
                                    Tensor& d_prediction) const = 0;
};

class RandomFeatureDistance final : public FeatureDistance {
 public:
  explicit RandomFeatureDistance(std::uint64_t seed = 0);

  double distance(const Tensor& a, const Tensor& b) const override;
  double distance_with_grad(const Tensor& prediction, const Tensor& target,
                            float weight, Tensor& d_prediction) const override;

  std::uint64_t seed() const { return seed_; }
  // Frozen conv stacks (1->8 s1, 8->16 s2, 16->32 s2), exposed for oracles.
  const Tensor& weights1() const { return w1_; }
  const Tensor& weights2() const { return w2_; }
  const Tensor& weights3() const { return w3_; }

 private:
  struct Features;
  Features extract(const Tensor& x) const;

  std::uint64_t seed_;
  Tensor w1_, w2_, w3_;  // conv stacks: 1->8 s1, 8->16 s2, 16->32 s2
};

// Weighted sum per the breakdown invariant. Throws DivergenceError naming the
// first non-finite component; `step` is carried into the error message.
LossBreakdown total_loss(double rec, double trans, double gan, double perce,
                         double kl, double fda, const LossWeights& weights,
                         long step = -1);

// Float-tensor conveniences over the templated span kernels.
double kl_to_standard_normal(const Tensor& mean, const Tensor& log_var);
FdaTerms<double> fda_terms(const Tensor& mean_a, const Tensor& log_var_a,
                           const Tensor& mean_b, const Tensor& log_var_b);
double fda_loss(const Tensor& mean_a, const Tensor& log_var_a,
                const Tensor& mean_b, const Tensor& log_var_b);

}  // namespace fdavae
