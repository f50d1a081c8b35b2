#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fdavae/layers.hpp"
#include "fdavae/rng.hpp"
#include "fdavae/tensor.hpp"

namespace fdavae {

struct ModelConfig {
  int input_h = 64;
  int input_w = 64;
  int base_channels = 32;
  int latent_channels = 8;
  int downsample_stages = 2;
  int residual_blocks_per_coder = 3;
  int attention_blocks_per_coder = 1;
  int discriminator_stages = 3;
  // Stage widths double per downsampling step, capped at this multiple of
  // base_channels.
  int max_width_multiplier = 8;

  int latent_h() const { return input_h >> downsample_stages; }
  int latent_w() const { return input_w >> downsample_stages; }
  int stage_width(int stage) const;

  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Faithful preset: 256x256, three residual blocks and one non-local
// attention block per coder; width calibrated so the generator lands on
// roughly 11.8M trainable parameters.
ModelConfig paper_scale_config();

// Small preset for CPU-scale experiments on 32x32 inputs.
ModelConfig desk_scale_config();

// Per-element Gaussian over the latent map.
struct LatentDistribution {
  Tensor mean;
  Tensor log_var;
};

struct LatentSample {
  Tensor values;
  Tensor epsilon_used;
};

// values = mean + exp(0.5*log_var) * epsilon, elementwise.
LatentSample reparameterize(const LatentDistribution& dist,
                            const Tensor& epsilon);
LatentSample reparameterize(const LatentDistribution& dist, RngStream& rng);

// Mirrors the distribution about the standard normal: (-mean, same log_var).
LatentDistribution flip(const LatentDistribution& dist);

// Propagates d(values) to d(mean), d(log_var) (accumulating).
void reparameterize_backward(const LatentDistribution& dist,
                             const LatentSample& sample, const Tensor& d_values,
                             Tensor& d_mean, Tensor& d_log_var);

class Encoder {
 public:
  Encoder(const ModelConfig& cfg, RngStream& rng);

  LatentDistribution forward(const Tensor& x, bool cache);
  // Takes gradients w.r.t. mean and log_var, returns gradient w.r.t. input.
  Tensor backward(const Tensor& d_mean, const Tensor& d_log_var);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  ModelConfig cfg_;
  Sequential body_;
  Conv2d head_;
  std::vector<unsigned char> clamp_mask_;  // log-var clamp pass-through mask
  int cached_n_ = 0, cached_h_ = 0, cached_w_ = 0;
};

enum class Phase { A, B };

class Decoder {
 public:
  Decoder(const ModelConfig& cfg, RngStream& rng);

  Tensor forward(const Tensor& z, bool cache);
  Tensor backward(const Tensor& dy);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  ModelConfig cfg_;
  Sequential body_;
};

class Discriminator {
 public:
  Discriminator(const ModelConfig& cfg, RngStream& rng);

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& dy);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Sequential body_;
};

enum class ParamScope { generator, discriminator, all };

// Shared encoder, two phase-specific decoders, patch discriminator.
class VaeModel {
 public:
  VaeModel(const ModelConfig& cfg, std::uint64_t init_seed);

  // Enforces the divisibility contract and batches through the encoder.
  LatentDistribution encode(const Tensor& x, bool cache = false);
  Tensor encode_backward(const Tensor& d_mean, const Tensor& d_log_var);

  Tensor decode(Phase phase, const Tensor& z, bool cache = false);
  Tensor decode_backward(Phase phase, const Tensor& dy);

  Tensor discriminate(const Tensor& x, bool cache = false);
  Tensor discriminate_backward(const Tensor& dy);

  std::vector<ParamRef> params(ParamScope scope);
  long count_parameters(ParamScope scope);

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Encoder encoder_;
  Decoder decoder_a_, decoder_b_;
  Discriminator discriminator_;
};

long count_parameters(VaeModel& model, ParamScope scope);

}  // namespace fdavae
