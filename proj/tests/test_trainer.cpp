#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fdavae/errors.hpp"
#include "fdavae/kernels.hpp"
#include "fdavae/phantom.hpp"
#include "fdavae/trainer.hpp"

using namespace fdavae;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.base_channels = 4;
  cfg.latent_channels = 4;
  cfg.downsample_stages = 2;
  cfg.discriminator_stages = 2;
  return cfg;
}

TrainConfig tiny_train(AblationMode mode = AblationMode::full) {
  TrainConfig cfg;
  cfg.model = tiny_model();
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.seed = 5;
  cfg.ablation = mode;
  return cfg;
}

std::vector<PhasePair> tiny_dataset(int n, int size = 16) {
  PhantomSpec spec;
  spec.canvas_size = size;
  spec.seed = 77;
  spec.noise_sigma = 0.01;
  std::vector<PhasePair> pairs;
  for (int i = 0; i < n; ++i) pairs.push_back(generate_phantom_pair(spec, i));
  return pairs;
}

void batch_from(const std::vector<PhasePair>& pairs, int from, int count,
                Tensor& x_a, Tensor& x_b) {
  const int h = pairs.front().phase_a.height;
  const int w = pairs.front().phase_a.width;
  x_a = Tensor(count, 1, h, w);
  x_b = Tensor(count, 1, h, w);
  for (int i = 0; i < count; ++i) {
    std::copy(pairs[from + i].phase_a.pixels.begin(),
              pairs[from + i].phase_a.pixels.end(), x_a.plane(i, 0));
    std::copy(pairs[from + i].phase_b.pixels.begin(),
              pairs[from + i].phase_b.pixels.end(), x_b.plane(i, 0));
  }
}

}  // namespace

TEST_CASE("backbone ablation reports zero fda and keeps training finite") {
  Trainer trainer(tiny_train(AblationMode::backbone_only));
  const auto pairs = tiny_dataset(4);
  Tensor x_a, x_b;
  batch_from(pairs, 0, 4, x_a, x_b);
  const StepResult r = trainer.train_step(x_a, x_b);
  CHECK(r.gen.fda == 0.0);
  CHECK(r.gen.rec == 0.0);
  CHECK(std::isfinite(r.gen.total));
  CHECK(std::isfinite(r.disc_loss));
}

TEST_CASE("two runs from the same seed produce identical loss sequences") {
  const auto pairs = tiny_dataset(8);
  std::vector<LossBreakdown> first, second;
  for (auto* sink : {&first, &second}) {
    Trainer trainer(tiny_train());
    for (int step = 0; step < 20; ++step) {
      Tensor x_a, x_b;
      batch_from(pairs, (step % 2) * 4, 4, x_a, x_b);
      sink->push_back(trainer.train_step(x_a, x_b).gen);
    }
  }
  for (int i = 0; i < 20; ++i) {
    CHECK(first[i].total ==
          doctest::Approx(second[i].total).epsilon(1e-6));
    CHECK(first[i].trans ==
          doctest::Approx(second[i].trans).epsilon(1e-6));
    CHECK(first[i].fda == doctest::Approx(second[i].fda).epsilon(1e-6));
  }
}

TEST_CASE("smoke training: translation loss falls over 200 steps") {
  const auto pairs = tiny_dataset(16);
  TrainConfig cfg = tiny_train();
  cfg.epochs = 50;  // 4 steps per epoch at batch 4
  Trainer trainer(cfg);

  double early = 0.0;
  double last = 0.0;
  for (int step = 0; step < 200; ++step) {
    Tensor x_a, x_b;
    batch_from(pairs, (step % 4) * 4, 4, x_a, x_b);
    const StepResult r = trainer.train_step(x_a, x_b);
    if (step < 10) early += r.gen.trans;
    last = r.gen.trans;
  }
  early /= 10.0;
  CHECK(last < early);
}

TEST_CASE("every generator and discriminator parameter receives gradient") {
  // Composite full-mode objective on random data, gradients inspected before
  // any optimizer step.
  VaeModel model(tiny_model(), 11);
  RngStream rng(13);
  Tensor x_a(2, 1, 16, 16), x_b(2, 1, 16, 16);
  for (auto& v : x_a.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : x_b.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  Tensor x_all(4, 1, 16, 16);
  std::copy(x_a.data.begin(), x_a.data.end(), x_all.data.begin());
  std::copy(x_b.data.begin(), x_b.data.end(),
            x_all.data.begin() + x_a.data.size());
  LatentDistribution dist_all = model.encode(x_all, true);

  const std::size_t half = dist_all.mean.size() / 2;
  LatentDistribution dist_a, dist_b;
  dist_a.mean = Tensor(2, 4, 4, 4);
  dist_a.log_var = Tensor(2, 4, 4, 4);
  dist_b.mean = Tensor(2, 4, 4, 4);
  dist_b.log_var = Tensor(2, 4, 4, 4);
  std::copy_n(dist_all.mean.data.begin(), half, dist_a.mean.data.begin());
  std::copy_n(dist_all.mean.data.begin() + half, half, dist_b.mean.data.begin());
  std::copy_n(dist_all.log_var.data.begin(), half, dist_a.log_var.data.begin());
  std::copy_n(dist_all.log_var.data.begin() + half, half,
              dist_b.log_var.data.begin());

  RngStream noise(17);
  const LatentSample z_aa = reparameterize(dist_a, noise);
  const LatentSample z_ab = reparameterize(flip(dist_a), noise);
  const LatentSample z_bb = reparameterize(dist_b, noise);
  const LatentSample z_ba = reparameterize(flip(dist_b), noise);

  Tensor dec_a_in(4, 4, 4, 4), dec_b_in(4, 4, 4, 4);
  std::copy(z_aa.values.data.begin(), z_aa.values.data.end(),
            dec_a_in.data.begin());
  std::copy(z_ba.values.data.begin(), z_ba.values.data.end(),
            dec_a_in.data.begin() + half);
  std::copy(z_bb.values.data.begin(), z_bb.values.data.end(),
            dec_b_in.data.begin());
  std::copy(z_ab.values.data.begin(), z_ab.values.data.end(),
            dec_b_in.data.begin() + half);

  Tensor out_a = model.decode(Phase::A, dec_a_in, true);
  Tensor out_b = model.decode(Phase::B, dec_b_in, true);

  Tensor fakes(4, 1, 16, 16);
  std::copy_n(out_b.data.begin() + out_b.size() / 2, out_b.size() / 2,
              fakes.data.begin());
  std::copy_n(out_a.data.begin() + out_a.size() / 2, out_a.size() / 2,
              fakes.data.begin() + out_a.size() / 2);
  Tensor fake_logits = model.discriminate(fakes, true);

  // Backward: L1 on all four outputs, generator GAN on the fakes, KL + FDA
  // on the distributions.
  Tensor d_out_a = Tensor::like(out_a);
  Tensor d_out_b = Tensor::like(out_b);
  Tensor targets_a(4, 1, 16, 16), targets_b(4, 1, 16, 16);
  std::copy(x_a.data.begin(), x_a.data.end(), targets_a.data.begin());
  std::copy(x_a.data.begin(), x_a.data.end(),
            targets_a.data.begin() + x_a.data.size());
  std::copy(x_b.data.begin(), x_b.data.end(), targets_b.data.begin());
  std::copy(x_b.data.begin(), x_b.data.end(),
            targets_b.data.begin() + x_b.data.size());
  l1_loss_grad(out_a, targets_a, 1.0f, d_out_a);
  l1_loss_grad(out_b, targets_b, 1.0f, d_out_b);

  Tensor d_logits = Tensor::like(fake_logits);
  gan_loss_generator_grad(fake_logits, 1.0f, d_logits);
  Tensor d_fakes = model.discriminate_backward(d_logits);
  kernels::axpy(d_fakes.size() / 2, 1.0f, d_fakes.data.data(),
                d_out_b.data.data() + d_out_b.size() / 2);
  kernels::axpy(d_fakes.size() / 2, 1.0f, d_fakes.data.data() + d_fakes.size() / 2,
                d_out_a.data.data() + d_out_a.size() / 2);

  Tensor d_dec_a = model.decode_backward(Phase::A, d_out_a);
  Tensor d_dec_b = model.decode_backward(Phase::B, d_out_b);

  Tensor d_mu(4, 4, 4, 4), d_lv(4, 4, 4, 4);
  // Route sample gradients back through the reparameterization.
  for (std::size_t i = 0; i < half; ++i) {
    const float sa = std::exp(0.5f * dist_a.log_var.data[i]);
    const float sb = std::exp(0.5f * dist_b.log_var.data[i]);
    d_mu.data[i] += d_dec_a.data[i] - d_dec_b.data[half + i];
    d_lv.data[i] += d_dec_a.data[i] * z_aa.epsilon_used.data[i] * 0.5f * sa +
                    d_dec_b.data[half + i] * z_ab.epsilon_used.data[i] * 0.5f * sa;
    d_mu.data[half + i] += d_dec_b.data[i] - d_dec_a.data[half + i];
    d_lv.data[half + i] +=
        d_dec_b.data[i] * z_bb.epsilon_used.data[i] * 0.5f * sb +
        d_dec_a.data[half + i] * z_ba.epsilon_used.data[i] * 0.5f * sb;
  }
  // KL and FDA gradients keep the latent heads well-covered.
  std::span<const float> ma(dist_a.mean.data.data(), half);
  std::span<const float> la(dist_a.log_var.data.data(), half);
  std::span<const float> mb(dist_b.mean.data.data(), half);
  std::span<const float> lb(dist_b.log_var.data.data(), half);
  std::span<float> dma(d_mu.data.data(), half);
  std::span<float> dla(d_lv.data.data(), half);
  std::span<float> dmb(d_mu.data.data() + half, half);
  std::span<float> dlb(d_lv.data.data() + half, half);
  kl_to_standard_normal_grad<float>(ma, la, 0.5f, dma, dla);
  kl_to_standard_normal_grad<float>(mb, lb, 0.5f, dmb, dlb);
  fda_loss_grad<float>(ma, la, mb, lb, 1.0f, dma, dla, dmb, dlb);

  model.encode_backward(d_mu, d_lv);

  for (const auto& p : model.params(ParamScope::generator)) {
    double norm = 0.0;
    for (const float g : p.grad->data) norm += std::fabs(g);
    INFO("generator parameter ", p.name);
    CHECK(norm > 0.0);
  }

  // Discriminator objective covers its own parameters.
  for (auto& p : model.params(ParamScope::all)) p.grad->zero();
  Tensor real_logits = model.discriminate(x_all, true);
  Tensor d_real = Tensor::like(real_logits);
  gan_loss_discriminator_grad_real(real_logits, 1.0f, d_real);
  model.discriminate_backward(d_real);
  for (const auto& p : model.params(ParamScope::discriminator)) {
    double norm = 0.0;
    for (const float g : p.grad->data) norm += std::fabs(g);
    INFO("discriminator parameter ", p.name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("discriminator update is detached from the generator") {
  VaeModel model(tiny_model(), 19);
  RngStream rng(23);
  Tensor real(2, 1, 16, 16), fake(2, 1, 16, 16);
  for (auto& v : real.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : fake.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  Tensor logits = model.discriminate(fake, true);
  Tensor d = Tensor::like(logits);
  gan_loss_discriminator_grad_fake(logits, 1.0f, d);
  model.discriminate_backward(d);

  for (const auto& p : model.params(ParamScope::generator)) {
    for (const float g : p.grad->data) REQUIRE(g == 0.0f);
  }
}

TEST_CASE("optimizer registries are disjoint") {
  Trainer trainer(tiny_train());
  std::set<std::string> gen_names;
  for (const auto& p : trainer.optimizer_generator().params())
    gen_names.insert(p.name);
  for (const auto& p : trainer.optimizer_discriminator().params())
    CHECK(gen_names.count(p.name) == 0);
}

TEST_CASE("train: bookkeeping of steps, rows, and artifacts") {
  namespace fs = std::filesystem;
  const auto run_dir = fs::temp_directory_path() / "fdavae_run_bk";
  fs::remove_all(run_dir);

  const auto pairs = tiny_dataset(16);
  TrainConfig cfg = tiny_train();
  cfg.epochs = 1;
  cfg.run_dir = run_dir.string();
  cfg.checkpoint_every = 2;
  Trainer trainer(cfg);
  const auto history =
      trainer.train(pairs, std::vector<PhasePair>(pairs.begin(), pairs.begin() + 4));

  REQUIRE(history.size() == 1u);
  CHECK(history[0].step == 4);  // 16 pairs / batch 4
  CHECK(history[0].epoch == 1);
  CHECK(std::isfinite(history[0].val_psnr));
  CHECK(fs::exists(run_dir / "run.json"));
  CHECK(fs::exists(run_dir / "history.csv"));
  CHECK(fs::exists(run_dir / "last.bin"));
  CHECK(fs::exists(run_dir / "ckpt_2.bin"));
  CHECK(fs::exists(run_dir / "ckpt_4.bin"));
  CHECK(fs::exists(run_dir / "best.bin"));

  std::ifstream f(run_dir / "history.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header ==
        "epoch,step,rec,trans,gan,perce,kl,fda,total,d_loss,val_psnr,val_ssim,"
        "val_symmetry");
  int rows = 0;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);
  fs::remove_all(run_dir);
}

TEST_CASE("resume from checkpoint reproduces uninterrupted training") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "fdavae_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto pairs = tiny_dataset(8);
  const std::vector<PhasePair> val(pairs.begin(), pairs.begin() + 2);

  TrainConfig cfg = tiny_train();
  cfg.batch_size = 4;
  cfg.epochs = 4;
  cfg.run_dir = (dir / "full").string();
  Trainer full(cfg);
  full.train(pairs, val);

  TrainConfig cfg_half = cfg;
  cfg_half.epochs = 2;
  cfg_half.run_dir = (dir / "half").string();
  Trainer half(cfg_half);
  half.train(pairs, val);

  TrainConfig cfg_resume = cfg;
  cfg_resume.epochs = 4;
  cfg_resume.run_dir = (dir / "resumed").string();
  cfg_resume.resume_from = (dir / "half" / "last.bin").string();
  Trainer resumed(cfg_resume);
  resumed.train(pairs, val);

  auto p_full = full.model().params(ParamScope::all);
  auto p_res = resumed.model().params(ParamScope::all);
  REQUIRE(p_full.size() == p_res.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < p_full.size(); ++i)
    for (std::size_t k = 0; k < p_full[i].value->size(); ++k) {
      const double a = p_full[i].value->data[k];
      const double b = p_res[i].value->data[k];
      worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(a)));
    }
  CHECK(worst <= 1e-5);
  fs::remove_all(dir);
}

TEST_CASE("train rejects an empty training set") {
  Trainer trainer(tiny_train());
  CHECK_THROWS_AS(trainer.train({}, {}), ConfigError);
}
