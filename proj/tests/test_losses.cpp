#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdavae/errors.hpp"
#include "fdavae/losses.hpp"
#include "fdavae/rng.hpp"

using namespace fdavae;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(n, c, h, w);
  RngStream rng(seed);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("kl: closed-form values") {
  // Standard normal itself.
  std::vector<double> mu{0.0}, lv{0.0};
  CHECK(kl_to_standard_normal<double>(mu, lv) == doctest::Approx(0.0));

  // mu=1, var=1: 0.5*(1+1-0-1) = 0.5.
  mu = {1.0};
  CHECK(kl_to_standard_normal<double>(mu, lv) == doctest::Approx(0.5));

  // mu=0, var=e: 0.5*(e - 1 - 1) = (e-2)/2.
  mu = {0.0};
  lv = {1.0};
  CHECK(kl_to_standard_normal<double>(mu, lv) ==
        doctest::Approx((std::exp(1.0) - 2.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("kl is nonnegative with equality only at the standard normal") {
  RngStream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> mu(4), lv(4);
    for (auto& v : mu) v = rng.uniform(-3.0, 3.0);
    for (auto& v : lv) v = rng.uniform(-3.0, 3.0);
    CHECK(kl_to_standard_normal<double>(mu, lv) >= 0.0);
  }
  std::vector<double> mu(4, 0.0), lv(4, 0.0);
  CHECK(kl_to_standard_normal<double>(mu, lv) == 0.0);
}

TEST_CASE("fda: closed-form values and symmetry") {
  // Mirror-image distributions: exactly zero.
  std::vector<double> ma{0.7, -1.2}, mb{-0.7, 1.2}, la{0.1, -0.4}, lb{0.1, -0.4};
  CHECK(fda_loss_span<double>(ma, la, mb, lb) == doctest::Approx(0.0));

  // mu_a = mu_b = [1,2], equal unit variances: mean(|2|,|4|) = 3.
  ma = {1.0, 2.0};
  mb = {1.0, 2.0};
  la = {0.0, 0.0};
  lb = {0.0, 0.0};
  CHECK(fda_loss_span<double>(ma, la, mb, lb) == doctest::Approx(3.0));

  // Single element, equal means, variances 2 vs 1 -> 1.
  ma = {0.0};
  mb = {0.0};
  la = {std::log(2.0)};
  lb = {0.0};
  CHECK(fda_loss_span<double>(ma, la, mb, lb) == doctest::Approx(1.0));

  // Symmetry under swapping the two distributions.
  RngStream rng(5);
  std::vector<double> ra(6), rla(6), rb(6), rlb(6);
  for (auto* v : {&ra, &rla, &rb, &rlb})
    for (auto& x : *v) x = rng.uniform(-2.0, 2.0);
  CHECK(fda_loss_span<double>(ra, rla, rb, rlb) ==
        doctest::Approx(fda_loss_span<double>(rb, rlb, ra, rla)).epsilon(1e-15));
}

TEST_CASE("fda of a distribution against its flip is zero") {
  Tensor mean = random_tensor(2, 3, 4, 4, 7);
  Tensor log_var = random_tensor(2, 3, 4, 4, 11);
  Tensor neg_mean = Tensor::like(mean);
  for (std::size_t i = 0; i < mean.size(); ++i)
    neg_mean.data[i] = -mean.data[i];
  CHECK(fda_loss(mean, log_var, neg_mean, log_var) == doctest::Approx(0.0));
}

TEST_CASE("kl and fda analytic gradients match central differences") {
  // Double-precision gradient check; FDA inputs are resampled away from the
  // |.| kinks so the subgradient is the true gradient there.
  RngStream rng(13);
  const double h = 1e-4;
  const std::size_t len = 6;

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mu(len), lv(len);
    for (auto& v : mu) v = rng.uniform(-2.0, 2.0);
    for (auto& v : lv) v = rng.uniform(-1.5, 1.5);

    std::vector<double> d_mu(len, 0.0), d_lv(len, 0.0);
    kl_to_standard_normal_grad<double>(mu, lv, 1.0, d_mu, d_lv);
    for (std::size_t i = 0; i < len; ++i) {
      auto perturbed = [&](std::vector<double>& vec, double delta) {
        vec[i] += delta;
        const double val = kl_to_standard_normal<double>(mu, lv);
        vec[i] -= delta;
        return val;
      };
      const double fd_mu = (perturbed(mu, h) - perturbed(mu, -h)) / (2 * h);
      REQUIRE(std::fabs(fd_mu - d_mu[i]) <=
              1e-4 * std::max(1e-3, std::fabs(fd_mu)));
      const double fd_lv = (perturbed(lv, h) - perturbed(lv, -h)) / (2 * h);
      REQUIRE(std::fabs(fd_lv - d_lv[i]) <=
              1e-4 * std::max(1e-3, std::fabs(fd_lv)));
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ma(len), la(len), mb(len), lb(len);
    for (std::size_t i = 0; i < len; ++i) {
      // Keep |mu_a + mu_b| and |var_a - var_b| away from the |.| kinks.
      ma[i] = rng.uniform(-2.0, 2.0);
      const double mu_gap =
          rng.uniform(0.1, 1.5) * (rng.uniform() < 0.5 ? 1.0 : -1.0);
      mb[i] = -ma[i] + mu_gap;
      la[i] = rng.uniform(-1.0, 1.0);
      lb[i] = la[i] + rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? 1.0 : -1.0);
    }
    std::vector<double> dma(len, 0.0), dla(len, 0.0), dmb(len, 0.0),
        dlb(len, 0.0);
    fda_loss_grad<double>(ma, la, mb, lb, 1.0, dma, dla, dmb, dlb);

    auto value = [&] { return fda_loss_span<double>(ma, la, mb, lb); };
    auto check_one = [&](std::vector<double>& vec, std::vector<double>& grad) {
      for (std::size_t i = 0; i < len; ++i) {
        vec[i] += h;
        const double up = value();
        vec[i] -= 2 * h;
        const double dn = value();
        vec[i] += h;
        const double fd = (up - dn) / (2 * h);
        REQUIRE(std::fabs(fd - grad[i]) <=
                1e-4 * std::max(1e-3, std::fabs(fd)));
      }
    };
    check_one(ma, dma);
    check_one(la, dla);
    check_one(mb, dmb);
    check_one(lb, dlb);
  }
}

TEST_CASE("l1 loss: basic cases and flatten-mean oracle") {
  Tensor a = random_tensor(2, 1, 4, 4, 17);
  CHECK(l1_loss(a, a) == doctest::Approx(0.0));

  Tensor shifted = a;
  for (auto& v : shifted.data) v += 0.3f;
  CHECK(l1_loss(shifted, a) == doctest::Approx(0.3).epsilon(1e-6));

  Tensor b = random_tensor(2, 1, 4, 4, 19);
  double oracle = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    oracle += std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
  oracle /= static_cast<double>(a.size());
  CHECK(l1_loss(a, b) == doctest::Approx(oracle).epsilon(1e-7));

  Tensor wrong(1, 1, 4, 4);
  CHECK_THROWS_AS(l1_loss(a, wrong), ShapeError);
}

TEST_CASE("lsgan targets: generator and discriminator optima") {
  Tensor ones(2, 1, 3, 3);
  ones.fill(1.0f);
  Tensor zeros(2, 1, 3, 3);

  CHECK(gan_loss_generator(ones) == doctest::Approx(0.0));
  CHECK(gan_loss_generator(zeros) == doctest::Approx(1.0));
  CHECK(gan_loss_discriminator(ones, zeros) == doctest::Approx(0.0));
  CHECK(gan_loss_discriminator(zeros, ones) == doctest::Approx(1.0));
}

TEST_CASE("perceptual distance: identity, symmetry, loop oracle") {
  RandomFeatureDistance fd(0);
  Tensor a = random_tensor(1, 1, 16, 16, 23);
  Tensor b = random_tensor(1, 1, 16, 16, 29);

  CHECK(fd.distance(a, a) == doctest::Approx(0.0));
  CHECK(fd.distance(a, b) == doctest::Approx(fd.distance(b, a)).epsilon(1e-12));
  CHECK(fd.distance(a, b) > 0.0);
}

TEST_CASE("perceptual distance gradient matches finite differences") {
  RandomFeatureDistance fd(0);
  Tensor a = random_tensor(1, 1, 8, 8, 31);
  Tensor b = random_tensor(1, 1, 8, 8, 37);
  Tensor grad = Tensor::like(a);
  fd.distance_with_grad(a, b, 1.0f, grad);

  const float h = 1e-2f;
  RngStream pick(41);
  for (int probe = 0; probe < 10; ++probe) {
    const std::size_t i = pick.uniform_index(a.size());
    Tensor ap = a, am = a;
    ap.data[i] += h;
    am.data[i] -= h;
    const double fdiff = (fd.distance(ap, b) - fd.distance(am, b)) / (2.0 * h);
    // Absolute floor absorbs finite-difference noise near the |.| kinks.
    CHECK(std::fabs(fdiff - grad.data[i]) <= 5e-3 + 2e-2 * std::fabs(fdiff));
  }
}

TEST_CASE("total_loss: weighted sum per the breakdown invariant") {
  LossWeights w;
  const LossBreakdown out = total_loss(1, 1, 1, 1, 1, 1, w);
  CHECK(out.total == doctest::Approx(1.0400001).epsilon(1e-9));

  const LossBreakdown zero = total_loss(0, 0, 0, 0, 0, 0, w);
  CHECK(zero.total == 0.0);

  LossWeights only_trans;
  only_trans.lambda_rec = only_trans.lambda_gan = only_trans.lambda_perce =
      only_trans.lambda_fda = only_trans.lambda_kl = 0.0;
  CHECK(total_loss(5, 2.5, 7, 3, 9, 4, only_trans).total ==
        doctest::Approx(2.5));

  // Linearity in each component with coefficient lambda.
  RngStream rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = rng.uniform(), t = rng.uniform(), g = rng.uniform();
    const double p = rng.uniform(), k = rng.uniform(), f = rng.uniform();
    const double base = total_loss(r, t, g, p, k, f, w).total;
    const double bumped = total_loss(r + 1.0, t, g, p, k, f, w).total;
    CHECK(bumped - base == doctest::Approx(w.lambda_rec).epsilon(1e-9));
    const double bumped_f = total_loss(r, t, g, p, k, f + 1.0, w).total;
    CHECK(bumped_f - base == doctest::Approx(w.lambda_fda).epsilon(1e-9));
  }
}

TEST_CASE("total_loss rejects non-finite components by name") {
  LossWeights w;
  try {
    total_loss(1, std::nan(""), 0, 0, 0, 0, w, 42);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.component == "trans");
    CHECK(e.step == 42);
  }
}
