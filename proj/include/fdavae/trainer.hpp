#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fdavae/checkpoint.hpp"
#include "fdavae/image.hpp"
#include "fdavae/losses.hpp"
#include "fdavae/model.hpp"
#include "fdavae/rng.hpp"

namespace fdavae {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-4;
  int epochs = 40;
  int batch_size = 8;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  long checkpoint_every = 0;  // 0 disables periodic checkpoints
  AblationMode ablation = AblationMode::full;
  std::string run_dir;      // empty: train in memory, write nothing
  std::string resume_from;  // optional checkpoint to continue from
  std::uint64_t perce_seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  bool quiet = true;

  void validate() const;
};

struct StepResult {
  LossBreakdown gen;
  double disc_loss = 0;
};

struct EpochRow {
  int epoch = 0;
  long step = 0;
  double rec = 0, trans = 0, gan = 0, perce = 0, kl = 0, fda = 0, total = 0;
  double d_loss = 0;
  double val_psnr = 0, val_ssim = 0, val_symmetry = 0;
};

// Per step: encode both phases, form the self-reconstruction and
// flip-translation decodes the ablation mode calls for, apply the weighted
// objective, one generator update then one discriminator update on detached
// translations.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  StepResult train_step(const Tensor& x_a, const Tensor& x_b);

  // Runs the remaining epochs, validating each epoch (deterministic A->B
  // synthesis + latent symmetry), checkpointing, and appending history rows.
  std::vector<EpochRow> train(const std::vector<PhasePair>& train_set,
                              const std::vector<PhasePair>& val_set);

  EpochRow validate_epoch(const std::vector<PhasePair>& val_set);
  void save(const std::string& path);

  VaeModel& model() { return *model_; }
  Adam& optimizer_generator() { return opt_gen_; }
  Adam& optimizer_discriminator() { return opt_disc_; }
  const RandomFeatureDistance& perceptual() const { return perce_; }
  long step() const { return step_; }
  bool uses_flip() const { return cfg_.ablation != AblationMode::backbone_only; }

 private:
  StepResult step_full(const Tensor& x_a, const Tensor& x_b);
  StepResult step_kl_fda(const Tensor& x_a, const Tensor& x_b);
  StepResult step_backbone(const Tensor& x_a, const Tensor& x_b);
  double discriminator_update(const Tensor& real, const Tensor& fake);
  Tensor draw_epsilon(const Tensor& like);

  TrainConfig cfg_;
  std::unique_ptr<VaeModel> model_;
  Adam opt_gen_, opt_disc_;
  RandomFeatureDistance perce_;
  RngStream sample_rng_;
  long step_ = 0;
  double best_val_psnr_ = -1e300;
};

void write_history_csv(const std::vector<EpochRow>& rows,
                       const std::string& path);

}  // namespace fdavae
