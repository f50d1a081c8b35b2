#include "fdavae/losses.hpp"

#include <cmath>

#include "fdavae/errors.hpp"
#include "fdavae/kernels.hpp"
#include "fdavae/rng.hpp"

namespace fdavae {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch (" +
                     std::to_string(a.n) + "," + std::to_string(a.c) + "," +
                     std::to_string(a.h) + "," + std::to_string(a.w) +
                     ") vs (" + std::to_string(b.n) + "," + std::to_string(b.c) +
                     "," + std::to_string(b.h) + "," + std::to_string(b.w) + ")");
}

}  // namespace

double l1_loss(const Tensor& prediction, const Tensor& target) {
  check_same_shape(prediction, target, "l1_loss");
  return kernels::sum_abs_diff(prediction.data.data(), target.data.data(),
                               prediction.size()) /
         static_cast<double>(prediction.size());
}

void l1_loss_grad(const Tensor& prediction, const Tensor& target, float weight,
                  Tensor& d_prediction) {
  check_same_shape(prediction, target, "l1_loss_grad");
  const float g = weight / static_cast<float>(prediction.size());
  const float* p = prediction.data.data();
  const float* t = target.data.data();
  float* d = d_prediction.data.data();
  for (std::size_t i = 0; i < prediction.size(); ++i)
    d[i] += p[i] > t[i] ? g : (p[i] < t[i] ? -g : 0.0f);
}

double gan_loss_generator(const Tensor& fake_logits) {
  double acc = 0.0;
  for (const float v : fake_logits.data) {
    const double d = static_cast<double>(v) - 1.0;
    acc += d * d;
  }
  return acc / static_cast<double>(fake_logits.size());
}

void gan_loss_generator_grad(const Tensor& fake_logits, float weight,
                             Tensor& d_logits) {
  const float g = 2.0f * weight / static_cast<float>(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i)
    d_logits.data[i] += g * (fake_logits.data[i] - 1.0f);
}

double gan_loss_discriminator(const Tensor& real_logits,
                              const Tensor& fake_logits) {
  double real_acc = 0.0;
  for (const float v : real_logits.data) {
    const double d = static_cast<double>(v) - 1.0;
    real_acc += d * d;
  }
  double fake_acc = 0.0;
  for (const float v : fake_logits.data)
    fake_acc += static_cast<double>(v) * v;
  return 0.5 * real_acc / static_cast<double>(real_logits.size()) +
         0.5 * fake_acc / static_cast<double>(fake_logits.size());
}

void gan_loss_discriminator_grad_real(const Tensor& real_logits, float weight,
                                      Tensor& d_logits) {
  const float g = weight / static_cast<float>(real_logits.size());
  for (std::size_t i = 0; i < real_logits.size(); ++i)
    d_logits.data[i] += g * (real_logits.data[i] - 1.0f);
}

void gan_loss_discriminator_grad_fake(const Tensor& fake_logits, float weight,
                                      Tensor& d_logits) {
  const float g = weight / static_cast<float>(fake_logits.size());
  for (std::size_t i = 0; i < fake_logits.size(); ++i)
    d_logits.data[i] += g * fake_logits.data[i];
}

// ---------------------------------------------------------------------------
// RandomFeatureDistance

struct RandomFeatureDistance::Features {
  Tensor z1, a1, z2, a2, z3, a3;  // pre- and post-activation per layer
};

RandomFeatureDistance::RandomFeatureDistance(std::uint64_t seed)
    : seed_(seed), w1_(8, 1, 3, 3), w2_(16, 8, 3, 3), w3_(32, 16, 3, 3) {
  RngStream rng(mix_seed(seed, 0x7065726365ull));
  for (Tensor* w : {&w1_, &w2_, &w3_}) {
    const double std_dev = std::sqrt(2.0 / (w->c * 9.0));
    for (auto& v : w->data) v = static_cast<float>(rng.normal(0.0, std_dev));
  }
}

RandomFeatureDistance::Features RandomFeatureDistance::extract(
    const Tensor& x) const {
  constexpr float kSlope = 0.2f;
  Features f;
  f.z1 = Tensor(x.n, 8, x.h, x.w);
  kernels::conv2d_forward(x, w1_, nullptr, 1, 1, f.z1);
  f.a1 = Tensor::like(f.z1);
  kernels::leaky_relu_forward(f.z1, kSlope, f.a1);

  f.z2 = Tensor(x.n, 16, kernels::conv_out_dim(x.h, 3, 2, 1),
                kernels::conv_out_dim(x.w, 3, 2, 1));
  kernels::conv2d_forward(f.a1, w2_, nullptr, 2, 1, f.z2);
  f.a2 = Tensor::like(f.z2);
  kernels::leaky_relu_forward(f.z2, kSlope, f.a2);

  f.z3 = Tensor(x.n, 32, kernels::conv_out_dim(f.z2.h, 3, 2, 1),
                kernels::conv_out_dim(f.z2.w, 3, 2, 1));
  kernels::conv2d_forward(f.a2, w3_, nullptr, 2, 1, f.z3);
  f.a3 = Tensor::like(f.z3);
  kernels::leaky_relu_forward(f.z3, kSlope, f.a3);
  return f;
}

double RandomFeatureDistance::distance(const Tensor& a, const Tensor& b) const {
  check_same_shape(a, b, "perceptual distance");
  const Features fa = extract(a);
  const Features fb = extract(b);
  double acc = 0.0;
  for (auto [pa, pb] : {std::pair{&fa.a1, &fb.a1}, std::pair{&fa.a2, &fb.a2},
                        std::pair{&fa.a3, &fb.a3}})
    acc += kernels::sum_abs_diff(pa->data.data(), pb->data.data(), pa->size()) /
           static_cast<double>(pa->size());
  return acc;
}

double RandomFeatureDistance::distance_with_grad(const Tensor& prediction,
                                                 const Tensor& target,
                                                 float weight,
                                                 Tensor& d_prediction) const {
  check_same_shape(prediction, target, "perceptual distance");
  constexpr float kSlope = 0.2f;
  const Features fp = extract(prediction);
  const Features ft = extract(target);

  auto layer_term = [](const Tensor& a, const Tensor& b) {
    return kernels::sum_abs_diff(a.data.data(), b.data.data(), a.size()) /
           static_cast<double>(a.size());
  };
  const double value =
      layer_term(fp.a1, ft.a1) + layer_term(fp.a2, ft.a2) +
      layer_term(fp.a3, ft.a3);

  auto add_sign = [&](const Tensor& a, const Tensor& b, Tensor& d) {
    const float g = weight / static_cast<float>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      d.data[i] += a.data[i] > b.data[i] ? g
                   : (a.data[i] < b.data[i] ? -g : 0.0f);
  };

  Tensor da3 = Tensor::like(fp.a3);
  add_sign(fp.a3, ft.a3, da3);
  Tensor dz3 = Tensor::like(fp.z3);
  kernels::leaky_relu_backward(da3, fp.z3, kSlope, dz3);

  Tensor da2 = Tensor::like(fp.a2);
  kernels::conv2d_backward_input(dz3, w3_, 2, 1, da2);
  add_sign(fp.a2, ft.a2, da2);
  Tensor dz2 = Tensor::like(fp.z2);
  kernels::leaky_relu_backward(da2, fp.z2, kSlope, dz2);

  Tensor da1 = Tensor::like(fp.a1);
  kernels::conv2d_backward_input(dz2, w2_, 2, 1, da1);
  add_sign(fp.a1, ft.a1, da1);
  Tensor dz1 = Tensor::like(fp.z1);
  kernels::leaky_relu_backward(da1, fp.z1, kSlope, dz1);

  Tensor dx = Tensor::like(prediction);
  kernels::conv2d_backward_input(dz1, w1_, 1, 1, dx);
  kernels::axpy(dx.size(), 1.0f, dx.data.data(), d_prediction.data.data());
  return value;
}

// ---------------------------------------------------------------------------
// total_loss and tensor wrappers

LossBreakdown total_loss(double rec, double trans, double gan, double perce,
                         double kl, double fda, const LossWeights& weights,
                         long step) {
  const struct {
    const char* name;
    double value;
  } components[] = {{"rec", rec},     {"trans", trans}, {"gan", gan},
                    {"perce", perce}, {"kl", kl},       {"fda", fda}};
  for (const auto& c : components)
    if (!std::isfinite(c.value)) throw DivergenceError(c.name, step);

  LossBreakdown out;
  out.rec = rec;
  out.trans = trans;
  out.gan = gan;
  out.perce = perce;
  out.kl = kl;
  out.fda = fda;
  out.total = weights.lambda_rec * rec + trans + weights.lambda_gan * gan +
              weights.lambda_perce * perce + weights.lambda_kl * kl +
              weights.lambda_fda * fda;
  if (!std::isfinite(out.total)) throw DivergenceError("total", step);
  return out;
}

double kl_to_standard_normal(const Tensor& mean, const Tensor& log_var) {
  return kl_to_standard_normal<double>(
      std::vector<double>(mean.data.begin(), mean.data.end()),
      std::vector<double>(log_var.data.begin(), log_var.data.end()));
}

FdaTerms<double> fda_terms(const Tensor& mean_a, const Tensor& log_var_a,
                           const Tensor& mean_b, const Tensor& log_var_b) {
  check_same_shape(mean_a, mean_b, "fda_loss");
  std::vector<double> ma(mean_a.data.begin(), mean_a.data.end());
  std::vector<double> la(log_var_a.data.begin(), log_var_a.data.end());
  std::vector<double> mb(mean_b.data.begin(), mean_b.data.end());
  std::vector<double> lb(log_var_b.data.begin(), log_var_b.data.end());
  return fda_terms<double>(ma, la, mb, lb);
}

double fda_loss(const Tensor& mean_a, const Tensor& log_var_a,
                const Tensor& mean_b, const Tensor& log_var_b) {
  return fda_terms(mean_a, log_var_a, mean_b, log_var_b).sum();
}

}  // namespace fdavae
