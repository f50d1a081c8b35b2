#include "fdavae/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "fdavae/errors.hpp"
#include "fdavae/kernels.hpp"
#include "fdavae/metrics.hpp"

namespace fdavae {

namespace {

Tensor concat_n(const Tensor& a, const Tensor& b) {
  Tensor out(a.n + b.n, a.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

Tensor slice_n(const Tensor& t, int from, int count) {
  Tensor out(count, t.c, t.h, t.w);
  const std::size_t stride = static_cast<std::size_t>(t.c) * t.h * t.w;
  std::copy(t.data.begin() + from * stride,
            t.data.begin() + (from + count) * stride, out.data.begin());
  return out;
}

// d(z)/d(mu, log_var) for z = mu_sign*mu + exp(0.5*log_var)*eps.
void add_reparam_grad(const Tensor& log_var, const Tensor& eps,
                      const Tensor& dz, float mu_sign, Tensor& d_mu,
                      Tensor& d_lv) {
  for (std::size_t i = 0; i < dz.size(); ++i) {
    d_mu.data[i] += mu_sign * dz.data[i];
    d_lv.data[i] += dz.data[i] * eps.data[i] * 0.5f *
                    std::exp(0.5f * log_var.data[i]);
  }
}

std::span<const float> cspan(const Tensor& t) {
  return {t.data.data(), t.data.size()};
}
std::span<float> span(Tensor& t) { return {t.data.data(), t.data.size()}; }

nlohmann::json config_json(const TrainConfig& cfg) {
  return nlohmann::json{
      {"model",
       {{"input_h", cfg.model.input_h},
        {"input_w", cfg.model.input_w},
        {"base_channels", cfg.model.base_channels},
        {"latent_channels", cfg.model.latent_channels},
        {"downsample_stages", cfg.model.downsample_stages},
        {"residual_blocks_per_coder", cfg.model.residual_blocks_per_coder},
        {"attention_blocks_per_coder", cfg.model.attention_blocks_per_coder},
        {"discriminator_stages", cfg.model.discriminator_stages},
        {"max_width_multiplier", cfg.model.max_width_multiplier}}},
      {"train",
       {{"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"seed", cfg.seed},
        {"checkpoint_every", cfg.checkpoint_every},
        {"ablation", to_string(cfg.ablation)},
        {"resume_from", cfg.resume_from},
        {"perce_seed", cfg.perce_seed},
        {"adam_beta1", cfg.adam_beta1},
        {"adam_beta2", cfg.adam_beta2},
        {"loss_weights",
         {{"rec", cfg.loss_weights.lambda_rec},
          {"gan", cfg.loss_weights.lambda_gan},
          {"perce", cfg.loss_weights.lambda_perce},
          {"fda", cfg.loss_weights.lambda_fda},
          {"kl", cfg.loss_weights.lambda_kl}}}}}};
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (loss_weights.lambda_rec < 0 || loss_weights.lambda_gan < 0 ||
      loss_weights.lambda_perce < 0 || loss_weights.lambda_fda < 0 ||
      loss_weights.lambda_kl < 0)
    throw ConfigError("train: loss weights must be >= 0");
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      model_(std::make_unique<VaeModel>(cfg.model, cfg.seed)),
      perce_(cfg.perce_seed),
      sample_rng_(mix_seed(cfg.seed, 0x5A4D5045ull)) {
  opt_gen_ = Adam(model_->params(ParamScope::generator), cfg.learning_rate,
                  cfg.adam_beta1, cfg.adam_beta2);
  opt_disc_ = Adam(model_->params(ParamScope::discriminator), cfg.learning_rate,
                   cfg.adam_beta1, cfg.adam_beta2);
  if (!cfg.resume_from.empty()) {
    const CheckpointMeta meta =
        load_checkpoint(cfg.resume_from, *model_, &opt_gen_, &opt_disc_);
    if (meta.ablation != cfg.ablation)
      throw ConfigError("resume: checkpoint ablation mode '" +
                        to_string(meta.ablation) + "' differs from config '" +
                        to_string(cfg.ablation) + "'");
    step_ = meta.step;
    best_val_psnr_ = meta.best_val_psnr;
    sample_rng_.deserialize(meta.sample_rng_state);
    perce_ = RandomFeatureDistance(meta.perce_seed);
  }
}

Tensor Trainer::draw_epsilon(const Tensor& like) {
  Tensor eps = Tensor::like(like);
  for (auto& v : eps.data) v = static_cast<float>(sample_rng_.normal());
  return eps;
}

StepResult Trainer::train_step(const Tensor& x_a, const Tensor& x_b) {
  if (!x_a.same_shape(x_b))
    throw ShapeError("train_step: phase batches must have the same shape");
  ++step_;
  switch (cfg_.ablation) {
    case AblationMode::full: return step_full(x_a, x_b);
    case AblationMode::kl_fda: return step_kl_fda(x_a, x_b);
    case AblationMode::backbone_only: return step_backbone(x_a, x_b);
  }
  throw ConfigError("train_step: bad ablation mode");
}

StepResult Trainer::step_full(const Tensor& x_a, const Tensor& x_b) {
  const auto& wts = cfg_.loss_weights;
  const int b = x_a.n;

  // Encode both phases as one batch (instance norm keeps samples independent).
  LatentDistribution dist_all = model_->encode(concat_n(x_a, x_b), true);
  LatentDistribution dist_a{slice_n(dist_all.mean, 0, b),
                            slice_n(dist_all.log_var, 0, b)};
  LatentDistribution dist_b{slice_n(dist_all.mean, b, b),
                            slice_n(dist_all.log_var, b, b)};

  // Fresh noise per pathway; order fixed for reproducibility.
  const Tensor eps_aa = draw_epsilon(dist_a.mean);
  const Tensor eps_ab = draw_epsilon(dist_a.mean);
  const Tensor eps_bb = draw_epsilon(dist_b.mean);
  const Tensor eps_ba = draw_epsilon(dist_b.mean);

  const LatentDistribution dist_a_flip = flip(dist_a);
  const LatentDistribution dist_b_flip = flip(dist_b);
  const LatentSample z_aa = reparameterize(dist_a, eps_aa);
  const LatentSample z_ab = reparameterize(dist_a_flip, eps_ab);
  const LatentSample z_bb = reparameterize(dist_b, eps_bb);
  const LatentSample z_ba = reparameterize(dist_b_flip, eps_ba);

  Tensor out_a = model_->decode(Phase::A, concat_n(z_aa.values, z_ba.values),
                                true);  // [xh_aa; xh_ba]
  Tensor out_b = model_->decode(Phase::B, concat_n(z_bb.values, z_ab.values),
                                true);  // [xh_bb; xh_ab]
  Tensor xh_aa = slice_n(out_a, 0, b), xh_ba = slice_n(out_a, b, b);
  Tensor xh_bb = slice_n(out_b, 0, b), xh_ab = slice_n(out_b, b, b);

  const double l_rec = 0.5 * (l1_loss(xh_aa, x_a) + l1_loss(xh_bb, x_b));
  const double l_trans = 0.5 * (l1_loss(xh_ab, x_b) + l1_loss(xh_ba, x_a));

  Tensor fakes = concat_n(xh_ab, xh_ba);
  Tensor fake_logits = model_->discriminate(fakes, true);
  const double l_gan = gan_loss_generator(fake_logits);

  Tensor d_xh_aa = Tensor::like(xh_aa), d_xh_ab = Tensor::like(xh_ab);
  Tensor d_xh_bb = Tensor::like(xh_bb), d_xh_ba = Tensor::like(xh_ba);
  const double p_ab = perce_.distance_with_grad(
      xh_ab, x_b, static_cast<float>(0.5 * wts.lambda_perce), d_xh_ab);
  const double p_ba = perce_.distance_with_grad(
      xh_ba, x_a, static_cast<float>(0.5 * wts.lambda_perce), d_xh_ba);
  const double l_perce = 0.5 * (p_ab + p_ba);

  const double kl_a = kl_to_standard_normal(dist_a.mean, dist_a.log_var);
  const double kl_b = kl_to_standard_normal(dist_b.mean, dist_b.log_var);
  const double l_kl = 0.5 * (kl_a + kl_b);
  const double l_fda =
      fda_loss(dist_a.mean, dist_a.log_var, dist_b.mean, dist_b.log_var);

  StepResult result;
  result.gen = total_loss(l_rec, l_trans, l_gan, l_perce, l_kl, l_fda, wts,
                          step_);

  // ---- generator backward ----
  l1_loss_grad(xh_aa, x_a, static_cast<float>(0.5 * wts.lambda_rec), d_xh_aa);
  l1_loss_grad(xh_bb, x_b, static_cast<float>(0.5 * wts.lambda_rec), d_xh_bb);
  l1_loss_grad(xh_ab, x_b, 0.5f, d_xh_ab);
  l1_loss_grad(xh_ba, x_a, 0.5f, d_xh_ba);

  Tensor d_fake_logits = Tensor::like(fake_logits);
  gan_loss_generator_grad(fake_logits, static_cast<float>(wts.lambda_gan),
                          d_fake_logits);
  Tensor d_fakes = model_->discriminate_backward(d_fake_logits);
  kernels::axpy(d_xh_ab.size(), 1.0f, d_fakes.plane(0, 0),
                d_xh_ab.data.data());
  kernels::axpy(d_xh_ba.size(), 1.0f, d_fakes.plane(b, 0),
                d_xh_ba.data.data());

  Tensor d_dec_b = model_->decode_backward(Phase::B, concat_n(d_xh_bb, d_xh_ab));
  Tensor d_dec_a = model_->decode_backward(Phase::A, concat_n(d_xh_aa, d_xh_ba));
  Tensor dz_bb = slice_n(d_dec_b, 0, b), dz_ab = slice_n(d_dec_b, b, b);
  Tensor dz_aa = slice_n(d_dec_a, 0, b), dz_ba = slice_n(d_dec_a, b, b);

  Tensor d_mu_a = Tensor::like(dist_a.mean), d_lv_a = Tensor::like(dist_a.mean);
  Tensor d_mu_b = Tensor::like(dist_b.mean), d_lv_b = Tensor::like(dist_b.mean);
  add_reparam_grad(dist_a.log_var, eps_aa, dz_aa, 1.0f, d_mu_a, d_lv_a);
  add_reparam_grad(dist_a.log_var, eps_ab, dz_ab, -1.0f, d_mu_a, d_lv_a);
  add_reparam_grad(dist_b.log_var, eps_bb, dz_bb, 1.0f, d_mu_b, d_lv_b);
  add_reparam_grad(dist_b.log_var, eps_ba, dz_ba, -1.0f, d_mu_b, d_lv_b);

  kl_to_standard_normal_grad<float>(cspan(dist_a.mean), cspan(dist_a.log_var),
                                    static_cast<float>(0.5 * wts.lambda_kl),
                                    span(d_mu_a), span(d_lv_a));
  kl_to_standard_normal_grad<float>(cspan(dist_b.mean), cspan(dist_b.log_var),
                                    static_cast<float>(0.5 * wts.lambda_kl),
                                    span(d_mu_b), span(d_lv_b));
  fda_loss_grad<float>(cspan(dist_a.mean), cspan(dist_a.log_var),
                       cspan(dist_b.mean), cspan(dist_b.log_var),
                       static_cast<float>(wts.lambda_fda), span(d_mu_a),
                       span(d_lv_a), span(d_mu_b), span(d_lv_b));

  model_->encode_backward(concat_n(d_mu_a, d_mu_b), concat_n(d_lv_a, d_lv_b));

  opt_gen_.step();
  opt_gen_.zero_grad();
  opt_disc_.zero_grad();

  // ---- discriminator update on detached translations ----
  result.disc_loss = discriminator_update(concat_n(x_b, x_a), fakes);
  return result;
}

StepResult Trainer::step_kl_fda(const Tensor& x_a, const Tensor& x_b) {
  const auto& wts = cfg_.loss_weights;
  const int b = x_a.n;

  LatentDistribution dist_all = model_->encode(concat_n(x_a, x_b), true);
  LatentDistribution dist_a{slice_n(dist_all.mean, 0, b),
                            slice_n(dist_all.log_var, 0, b)};
  LatentDistribution dist_b{slice_n(dist_all.mean, b, b),
                            slice_n(dist_all.log_var, b, b)};

  const Tensor eps_bb = draw_epsilon(dist_b.mean);
  const Tensor eps_ab = draw_epsilon(dist_a.mean);

  const LatentDistribution dist_a_flip = flip(dist_a);
  const LatentSample z_bb = reparameterize(dist_b, eps_bb);
  const LatentSample z_ab = reparameterize(dist_a_flip, eps_ab);

  // Single decoder: self-reconstruction of the target plus the flipped
  // translation from the source.
  Tensor out = model_->decode(Phase::B, concat_n(z_bb.values, z_ab.values),
                              true);  // [xh_bb; xh_ab]
  Tensor xh_bb = slice_n(out, 0, b), xh_ab = slice_n(out, b, b);

  const double l_rec = l1_loss(xh_bb, x_b);
  const double l_trans = l1_loss(xh_ab, x_b);

  Tensor fake_logits = model_->discriminate(xh_ab, true);
  const double l_gan = gan_loss_generator(fake_logits);

  Tensor d_xh_bb = Tensor::like(xh_bb), d_xh_ab = Tensor::like(xh_ab);
  const double l_perce = perce_.distance_with_grad(
      xh_ab, x_b, static_cast<float>(wts.lambda_perce), d_xh_ab);

  const double kl_a = kl_to_standard_normal(dist_a.mean, dist_a.log_var);
  const double kl_b = kl_to_standard_normal(dist_b.mean, dist_b.log_var);
  const double l_kl = 0.5 * (kl_a + kl_b);
  const double l_fda =
      fda_loss(dist_a.mean, dist_a.log_var, dist_b.mean, dist_b.log_var);

  StepResult result;
  result.gen = total_loss(l_rec, l_trans, l_gan, l_perce, l_kl, l_fda, wts,
                          step_);

  l1_loss_grad(xh_bb, x_b, static_cast<float>(wts.lambda_rec), d_xh_bb);
  l1_loss_grad(xh_ab, x_b, 1.0f, d_xh_ab);

  Tensor d_fake_logits = Tensor::like(fake_logits);
  gan_loss_generator_grad(fake_logits, static_cast<float>(wts.lambda_gan),
                          d_fake_logits);
  Tensor d_fakes = model_->discriminate_backward(d_fake_logits);
  kernels::axpy(d_xh_ab.size(), 1.0f, d_fakes.data.data(), d_xh_ab.data.data());

  Tensor d_dec = model_->decode_backward(Phase::B, concat_n(d_xh_bb, d_xh_ab));
  Tensor dz_bb = slice_n(d_dec, 0, b), dz_ab = slice_n(d_dec, b, b);

  Tensor d_mu_a = Tensor::like(dist_a.mean), d_lv_a = Tensor::like(dist_a.mean);
  Tensor d_mu_b = Tensor::like(dist_b.mean), d_lv_b = Tensor::like(dist_b.mean);
  add_reparam_grad(dist_b.log_var, eps_bb, dz_bb, 1.0f, d_mu_b, d_lv_b);
  add_reparam_grad(dist_a.log_var, eps_ab, dz_ab, -1.0f, d_mu_a, d_lv_a);

  kl_to_standard_normal_grad<float>(cspan(dist_a.mean), cspan(dist_a.log_var),
                                    static_cast<float>(0.5 * wts.lambda_kl),
                                    span(d_mu_a), span(d_lv_a));
  kl_to_standard_normal_grad<float>(cspan(dist_b.mean), cspan(dist_b.log_var),
                                    static_cast<float>(0.5 * wts.lambda_kl),
                                    span(d_mu_b), span(d_lv_b));
  fda_loss_grad<float>(cspan(dist_a.mean), cspan(dist_a.log_var),
                       cspan(dist_b.mean), cspan(dist_b.log_var),
                       static_cast<float>(wts.lambda_fda), span(d_mu_a),
                       span(d_lv_a), span(d_mu_b), span(d_lv_b));

  model_->encode_backward(concat_n(d_mu_a, d_mu_b), concat_n(d_lv_a, d_lv_b));

  opt_gen_.step();
  opt_gen_.zero_grad();
  opt_disc_.zero_grad();

  result.disc_loss = discriminator_update(x_b, xh_ab);
  return result;
}

StepResult Trainer::step_backbone(const Tensor& x_a, const Tensor& x_b) {
  const auto& wts = cfg_.loss_weights;

  // Plain one-to-one VAE translator: encode the source, sample without
  // flipping, decode with the target decoder.
  LatentDistribution dist_a = model_->encode(x_a, true);
  const Tensor eps = draw_epsilon(dist_a.mean);
  const LatentSample z = reparameterize(dist_a, eps);

  Tensor xh_ab = model_->decode(Phase::B, z.values, true);

  const double l_trans = l1_loss(xh_ab, x_b);
  Tensor fake_logits = model_->discriminate(xh_ab, true);
  const double l_gan = gan_loss_generator(fake_logits);

  Tensor d_xh_ab = Tensor::like(xh_ab);
  const double l_perce = perce_.distance_with_grad(
      xh_ab, x_b, static_cast<float>(wts.lambda_perce), d_xh_ab);
  const double l_kl = kl_to_standard_normal(dist_a.mean, dist_a.log_var);

  StepResult result;
  result.gen = total_loss(0.0, l_trans, l_gan, l_perce, l_kl, 0.0, wts, step_);

  l1_loss_grad(xh_ab, x_b, 1.0f, d_xh_ab);
  Tensor d_fake_logits = Tensor::like(fake_logits);
  gan_loss_generator_grad(fake_logits, static_cast<float>(wts.lambda_gan),
                          d_fake_logits);
  Tensor d_fakes = model_->discriminate_backward(d_fake_logits);
  kernels::axpy(d_xh_ab.size(), 1.0f, d_fakes.data.data(), d_xh_ab.data.data());

  Tensor dz = model_->decode_backward(Phase::B, d_xh_ab);

  Tensor d_mu = Tensor::like(dist_a.mean), d_lv = Tensor::like(dist_a.mean);
  add_reparam_grad(dist_a.log_var, eps, dz, 1.0f, d_mu, d_lv);
  kl_to_standard_normal_grad<float>(cspan(dist_a.mean), cspan(dist_a.log_var),
                                    static_cast<float>(wts.lambda_kl),
                                    span(d_mu), span(d_lv));

  model_->encode_backward(d_mu, d_lv);

  opt_gen_.step();
  opt_gen_.zero_grad();
  opt_disc_.zero_grad();

  result.disc_loss = discriminator_update(x_b, xh_ab);
  return result;
}

double Trainer::discriminator_update(const Tensor& real, const Tensor& fake) {
  Tensor real_logits = model_->discriminate(real, true);
  Tensor d_real = Tensor::like(real_logits);
  gan_loss_discriminator_grad_real(real_logits, 1.0f, d_real);
  model_->discriminate_backward(d_real);

  Tensor fake_logits = model_->discriminate(fake, true);
  Tensor d_fake = Tensor::like(fake_logits);
  gan_loss_discriminator_grad_fake(fake_logits, 1.0f, d_fake);
  model_->discriminate_backward(d_fake);

  const double loss = gan_loss_discriminator(real_logits, fake_logits);
  if (!std::isfinite(loss)) throw DivergenceError("d_loss", step_);

  opt_disc_.step();
  opt_disc_.zero_grad();
  opt_gen_.zero_grad();
  return loss;
}

EpochRow Trainer::validate_epoch(const std::vector<PhasePair>& val_set) {
  EpochRow row;
  if (val_set.empty()) return row;

  // Deterministic A->B synthesis (epsilon = 0), batched for throughput.
  double psnr_acc = 0.0, ssim_acc = 0.0;
  const int chunk = 16;
  for (std::size_t start = 0; start < val_set.size();
       start += static_cast<std::size_t>(chunk)) {
    const std::size_t count =
        std::min<std::size_t>(chunk, val_set.size() - start);
    std::vector<const Image*> srcs;
    for (std::size_t i = 0; i < count; ++i)
      srcs.push_back(&val_set[start + i].phase_a);
    LatentDistribution dist = model_->encode(images_to_tensor(srcs));
    if (uses_flip()) dist = flip(dist);
    const Tensor out = model_->decode(Phase::B, dist.mean);
    for (std::size_t i = 0; i < count; ++i) {
      const Image synth = tensor_to_image(out, static_cast<int>(i));
      psnr_acc += psnr(synth, val_set[start + i].phase_b, 2.0);
      ssim_acc += ssim(synth, val_set[start + i].phase_b, 2.0);
    }
  }
  row.val_psnr = psnr_acc / static_cast<double>(val_set.size());
  row.val_ssim = ssim_acc / static_cast<double>(val_set.size());
  row.val_symmetry = latent_symmetry_report(*model_, val_set).mean_abs_mu_sum;
  return row;
}

void Trainer::save(const std::string& path) {
  CheckpointMeta meta;
  meta.model = cfg_.model;
  meta.ablation = cfg_.ablation;
  meta.step = step_;
  meta.epoch = 0;  // informational; derived from step on resume
  meta.best_val_psnr = best_val_psnr_;
  meta.sample_rng_state = sample_rng_.serialize();
  meta.perce_seed = cfg_.perce_seed;
  save_checkpoint(path, meta, *model_, &opt_gen_, &opt_disc_);
}

std::vector<EpochRow> Trainer::train(const std::vector<PhasePair>& train_set,
                                     const std::vector<PhasePair>& val_set) {
  namespace fs = std::filesystem;
  if (train_set.empty()) throw ConfigError("train: empty training set");

  const bool writing = !cfg_.run_dir.empty();
  std::ofstream history_file;
  if (writing) {
    std::error_code ec;
    fs::create_directories(cfg_.run_dir, ec);
    if (ec) throw IoError("cannot create run dir: " + cfg_.run_dir);
    std::ofstream cfg_file((fs::path(cfg_.run_dir) / "run.json").string());
    if (!cfg_file) throw IoError("cannot write run.json in " + cfg_.run_dir);
    cfg_file << config_json(cfg_).dump(2) << "\n";

    const bool fresh = step_ == 0;
    history_file.open((fs::path(cfg_.run_dir) / "history.csv").string(),
                      fresh ? std::ios::trunc : std::ios::app);
    if (!history_file) throw IoError("cannot write history.csv");
    if (fresh)
      history_file << "epoch,step,rec,trans,gan,perce,kl,fda,total,d_loss,"
                      "val_psnr,val_ssim,val_symmetry\n";
  }

  const long n = static_cast<long>(train_set.size());
  const long spe = (n + cfg_.batch_size - 1) / cfg_.batch_size;
  const int start_epoch = static_cast<int>(step_ / spe);
  const long start_offset = step_ % spe;

  const int h = train_set.front().phase_a.height;
  const int w = train_set.front().phase_a.width;

  std::vector<EpochRow> history;
  for (int e = start_epoch; e < cfg_.epochs; ++e) {
    // Deterministic shuffle, a pure function of (seed, epoch): resuming from
    // a checkpoint reproduces the identical batch order.
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng(mix_seed(cfg_.seed, 0xE70C0000ull + e));
    for (long i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double sums[8] = {0};
    long steps_this_epoch = 0;
    for (long bi = (e == start_epoch ? start_offset : 0); bi < spe; ++bi) {
      const long lo = bi * cfg_.batch_size;
      const long hi = std::min(n, lo + cfg_.batch_size);
      Tensor x_a(static_cast<int>(hi - lo), 1, h, w);
      Tensor x_b(static_cast<int>(hi - lo), 1, h, w);
      for (long i = lo; i < hi; ++i) {
        const PhasePair& p = train_set[order[i]];
        std::copy(p.phase_a.pixels.begin(), p.phase_a.pixels.end(),
                  x_a.plane(static_cast<int>(i - lo), 0));
        std::copy(p.phase_b.pixels.begin(), p.phase_b.pixels.end(),
                  x_b.plane(static_cast<int>(i - lo), 0));
      }
      const StepResult r = train_step(x_a, x_b);
      sums[0] += r.gen.rec;
      sums[1] += r.gen.trans;
      sums[2] += r.gen.gan;
      sums[3] += r.gen.perce;
      sums[4] += r.gen.kl;
      sums[5] += r.gen.fda;
      sums[6] += r.gen.total;
      sums[7] += r.disc_loss;
      ++steps_this_epoch;

      if (writing && cfg_.checkpoint_every > 0 &&
          step_ % cfg_.checkpoint_every == 0)
        save((fs::path(cfg_.run_dir) / ("ckpt_" + std::to_string(step_) + ".bin"))
                 .string());
    }

    EpochRow row = validate_epoch(val_set);
    row.epoch = e + 1;
    row.step = step_;
    if (steps_this_epoch > 0) {
      row.rec = sums[0] / steps_this_epoch;
      row.trans = sums[1] / steps_this_epoch;
      row.gan = sums[2] / steps_this_epoch;
      row.perce = sums[3] / steps_this_epoch;
      row.kl = sums[4] / steps_this_epoch;
      row.fda = sums[5] / steps_this_epoch;
      row.total = sums[6] / steps_this_epoch;
      row.d_loss = sums[7] / steps_this_epoch;
    }
    history.push_back(row);

    if (writing) {
      char line[512];
      std::snprintf(line, sizeof(line),
                    "%d,%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
                    "%.9g\n",
                    row.epoch, row.step, row.rec, row.trans, row.gan, row.perce,
                    row.kl, row.fda, row.total, row.d_loss, row.val_psnr,
                    row.val_ssim, row.val_symmetry);
      history_file << line;
      history_file.flush();
    }
    if (!cfg_.quiet)
      std::cerr << "epoch " << row.epoch << "/" << cfg_.epochs
                << " step " << row.step << " trans " << row.trans
                << " val_psnr " << row.val_psnr << " sym " << row.val_symmetry
                << "\n";

    if (!val_set.empty() && row.val_psnr > best_val_psnr_) {
      best_val_psnr_ = row.val_psnr;
      if (writing) save((fs::path(cfg_.run_dir) / "best.bin").string());
    }
  }

  if (writing) save((fs::path(cfg_.run_dir) / "last.bin").string());
  return history;
}

void write_history_csv(const std::vector<EpochRow>& rows,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write history: " + path);
  f << "epoch,step,rec,trans,gan,perce,kl,fda,total,d_loss,val_psnr,val_ssim,"
       "val_symmetry\n";
  char line[512];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line),
                  "%d,%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
                  "%.9g\n",
                  row.epoch, row.step, row.rec, row.trans, row.gan, row.perce,
                  row.kl, row.fda, row.total, row.d_loss, row.val_psnr,
                  row.val_ssim, row.val_symmetry);
    f << line;
  }
}

}  // namespace fdavae
