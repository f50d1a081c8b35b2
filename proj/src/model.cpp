#include "fdavae/model.hpp"

#include <algorithm>
#include <cmath>

#include "fdavae/errors.hpp"
#include "fdavae/kernels.hpp"

namespace fdavae {

namespace {
constexpr float kLogVarClamp = 14.0f;
}

int ModelConfig::stage_width(int stage) const {
  const int mult = std::min(1 << stage, max_width_multiplier);
  return base_channels * mult;
}

void ModelConfig::validate() const {
  if (input_h < 8 || input_w < 8)
    throw ConfigError("model: input dimensions must be >= 8");
  if (downsample_stages < 1)
    throw ConfigError("model: downsample_stages must be >= 1");
  const int factor = 1 << downsample_stages;
  if (input_h % factor != 0 || input_w % factor != 0)
    throw ConfigError("model: input " + std::to_string(input_w) + "x" +
                      std::to_string(input_h) + " not divisible by 2^" +
                      std::to_string(downsample_stages));
  if (base_channels < 2)
    throw ConfigError("model: base_channels must be >= 2");
  if (latent_channels < 1)
    throw ConfigError("model: latent_channels must be >= 1");
  if (residual_blocks_per_coder < 0 || attention_blocks_per_coder < 0)
    throw ConfigError("model: negative block counts");
  if (discriminator_stages < 1)
    throw ConfigError("model: discriminator_stages must be >= 1");
  if (input_h % (1 << discriminator_stages) != 0 ||
      input_w % (1 << discriminator_stages) != 0)
    throw ConfigError("model: input not divisible by 2^discriminator_stages");
}

ModelConfig paper_scale_config() {
  ModelConfig cfg;
  cfg.input_h = 256;
  cfg.input_w = 256;
  cfg.base_channels = 44;
  cfg.latent_channels = 8;
  cfg.downsample_stages = 3;
  cfg.residual_blocks_per_coder = 3;
  cfg.attention_blocks_per_coder = 1;
  cfg.discriminator_stages = 3;
  return cfg;
}

ModelConfig desk_scale_config() {
  ModelConfig cfg;
  cfg.input_h = 32;
  cfg.input_w = 32;
  cfg.base_channels = 8;
  cfg.latent_channels = 8;
  cfg.downsample_stages = 2;
  cfg.residual_blocks_per_coder = 3;
  cfg.attention_blocks_per_coder = 1;
  cfg.discriminator_stages = 3;
  return cfg;
}

// ---------------------------------------------------------------------------
// Latent ops

LatentSample reparameterize(const LatentDistribution& dist,
                            const Tensor& epsilon) {
  if (!dist.mean.same_shape(epsilon))
    throw ShapeError("reparameterize: epsilon shape mismatch");
  LatentSample s;
  s.values = Tensor::like(dist.mean);
  s.epsilon_used = epsilon;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    s.values.data[i] =
        dist.mean.data[i] +
        std::exp(0.5f * dist.log_var.data[i]) * epsilon.data[i];
  return s;
}

LatentSample reparameterize(const LatentDistribution& dist, RngStream& rng) {
  Tensor eps = Tensor::like(dist.mean);
  for (auto& v : eps.data) v = static_cast<float>(rng.normal());
  return reparameterize(dist, eps);
}

LatentDistribution flip(const LatentDistribution& dist) {
  LatentDistribution out;
  out.mean = Tensor::like(dist.mean);
  for (std::size_t i = 0; i < dist.mean.size(); ++i)
    out.mean.data[i] = -dist.mean.data[i];
  out.log_var = dist.log_var;
  return out;
}

void reparameterize_backward(const LatentDistribution& dist,
                             const LatentSample& sample, const Tensor& d_values,
                             Tensor& d_mean, Tensor& d_log_var) {
  for (std::size_t i = 0; i < d_values.size(); ++i) {
    d_mean.data[i] += d_values.data[i];
    d_log_var.data[i] += d_values.data[i] * sample.epsilon_used.data[i] *
                         0.5f * std::exp(0.5f * dist.log_var.data[i]);
  }
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const ModelConfig& cfg, RngStream& rng)
    : cfg_(cfg),
      head_(cfg.stage_width(cfg.downsample_stages), 2 * cfg.latent_channels, 3,
            1, 1, true, rng) {
  const int s = cfg.downsample_stages;
  const int r = cfg.residual_blocks_per_coder;

  body_.emplace<Conv2d>(1, cfg.stage_width(0), 3, 1, 1, false, rng);
  body_.name_last("stem");
  body_.emplace<InstanceNorm2d>(cfg.stage_width(0));
  body_.name_last("stem_norm");
  body_.emplace<LeakyReLU>();

  int placed_res = 0;
  for (int i = 1; i <= s; ++i) {
    body_.emplace<Conv2d>(cfg.stage_width(i - 1), cfg.stage_width(i), 3, 2, 1,
                          false, rng);
    body_.name_last("down" + std::to_string(i));
    body_.emplace<InstanceNorm2d>(cfg.stage_width(i));
    body_.name_last("down" + std::to_string(i) + "_norm");
    body_.emplace<LeakyReLU>();
    if (placed_res < r) {
      body_.emplace<ResidualBlock>(cfg.stage_width(i), rng);
      body_.name_last("res" + std::to_string(placed_res + 1));
      ++placed_res;
    }
  }
  // Remaining residual blocks and all attention at the lowest resolution,
  // where the quadratic attention cost is cheapest.
  while (placed_res < r) {
    body_.emplace<ResidualBlock>(cfg.stage_width(s), rng);
    body_.name_last("res" + std::to_string(placed_res + 1));
    ++placed_res;
  }
  for (int i = 0; i < cfg.attention_blocks_per_coder; ++i) {
    body_.emplace<NonLocalAttention>(cfg.stage_width(s), rng);
    body_.name_last("attn" + std::to_string(i + 1));
  }
}

LatentDistribution Encoder::forward(const Tensor& x, bool cache) {
  Tensor h = body_.forward(x, cache);
  Tensor raw = head_.forward(h, cache);

  const int latent = cfg_.latent_channels;
  LatentDistribution dist;
  dist.mean = Tensor(raw.n, latent, raw.h, raw.w);
  dist.log_var = Tensor(raw.n, latent, raw.h, raw.w);
  if (cache) {
    clamp_mask_.assign(dist.log_var.size(), 1);
    cached_n_ = raw.n;
    cached_h_ = raw.h;
    cached_w_ = raw.w;
  }
  const std::size_t plane = static_cast<std::size_t>(raw.h) * raw.w;
  for (int ni = 0; ni < raw.n; ++ni) {
    for (int ci = 0; ci < latent; ++ci) {
      const float* mu_src = raw.plane(ni, ci);
      const float* lv_src = raw.plane(ni, latent + ci);
      float* mu_dst = dist.mean.plane(ni, ci);
      float* lv_dst = dist.log_var.plane(ni, ci);
      for (std::size_t i = 0; i < plane; ++i) {
        mu_dst[i] = mu_src[i];
        float lv = lv_src[i];
        if (lv > kLogVarClamp || lv < -kLogVarClamp) {
          lv = std::clamp(lv, -kLogVarClamp, kLogVarClamp);
          if (cache)
            clamp_mask_[(static_cast<std::size_t>(ni) * latent + ci) * plane +
                        i] = 0;
        }
        lv_dst[i] = lv;
      }
    }
  }
  return dist;
}

Tensor Encoder::backward(const Tensor& d_mean, const Tensor& d_log_var) {
  const int latent = cfg_.latent_channels;
  Tensor d_raw(cached_n_, 2 * latent, cached_h_, cached_w_);
  const std::size_t plane = static_cast<std::size_t>(cached_h_) * cached_w_;
  for (int ni = 0; ni < cached_n_; ++ni) {
    for (int ci = 0; ci < latent; ++ci) {
      const float* dmu = d_mean.plane(ni, ci);
      const float* dlv = d_log_var.plane(ni, ci);
      float* mu_dst = d_raw.plane(ni, ci);
      float* lv_dst = d_raw.plane(ni, latent + ci);
      for (std::size_t i = 0; i < plane; ++i) {
        mu_dst[i] = dmu[i];
        const bool pass =
            clamp_mask_[(static_cast<std::size_t>(ni) * latent + ci) * plane +
                        i] != 0;
        lv_dst[i] = pass ? dlv[i] : 0.0f;
      }
    }
  }
  Tensor dh = head_.backward(d_raw);
  return body_.backward(dh);
}

void Encoder::collect_params(const std::string& prefix,
                             std::vector<ParamRef>& out) {
  body_.collect_params(prefix, out);
  head_.collect_params(prefix + ".head", out);
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(const ModelConfig& cfg, RngStream& rng) : cfg_(cfg) {
  const int s = cfg.downsample_stages;
  const int r = cfg.residual_blocks_per_coder;

  body_.emplace<Conv2d>(cfg.latent_channels, cfg.stage_width(s), 3, 1, 1,
                        false, rng);
  body_.name_last("head");
  body_.emplace<InstanceNorm2d>(cfg.stage_width(s));
  body_.name_last("head_norm");
  body_.emplace<LeakyReLU>();

  for (int i = 0; i < cfg.attention_blocks_per_coder; ++i) {
    body_.emplace<NonLocalAttention>(cfg.stage_width(s), rng);
    body_.name_last("attn" + std::to_string(i + 1));
  }

  int remaining_res = r;
  // Extra residual blocks (beyond one per stage) at the lowest resolution.
  while (remaining_res > s) {
    body_.emplace<ResidualBlock>(cfg.stage_width(s), rng);
    body_.name_last("res" + std::to_string(remaining_res));
    --remaining_res;
  }
  for (int i = s; i >= 1; --i) {
    if (remaining_res >= i && remaining_res > 0) {
      body_.emplace<ResidualBlock>(cfg.stage_width(i), rng);
      body_.name_last("res" + std::to_string(remaining_res));
      --remaining_res;
    }
    body_.emplace<Upsample2x>();
    body_.emplace<Conv2d>(cfg.stage_width(i), cfg.stage_width(i - 1), 3, 1, 1,
                          false, rng);
    body_.name_last("up" + std::to_string(i));
    body_.emplace<InstanceNorm2d>(cfg.stage_width(i - 1));
    body_.name_last("up" + std::to_string(i) + "_norm");
    body_.emplace<LeakyReLU>();
  }

  body_.emplace<Conv2d>(cfg.stage_width(0), 1, 3, 1, 1, true, rng);
  body_.name_last("out");
  body_.emplace<Tanh>();
}

Tensor Decoder::forward(const Tensor& z, bool cache) {
  if (z.c != cfg_.latent_channels)
    throw ShapeError("decoder: expected " +
                     std::to_string(cfg_.latent_channels) +
                     " latent channels, got " + std::to_string(z.c));
  return body_.forward(z, cache);
}

Tensor Decoder::backward(const Tensor& dy) { return body_.backward(dy); }

void Decoder::collect_params(const std::string& prefix,
                             std::vector<ParamRef>& out) {
  body_.collect_params(prefix, out);
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const ModelConfig& cfg, RngStream& rng) {
  int prev = 1;
  for (int i = 1; i <= cfg.discriminator_stages; ++i) {
    const int width = cfg.base_channels *
                      std::min(1 << (i - 1), cfg.max_width_multiplier);
    // First stage keeps its bias: no norm layer follows it.
    body_.emplace<Conv2d>(prev, width, 3, 2, 1, i == 1, rng);
    body_.name_last("conv" + std::to_string(i));
    if (i > 1) {
      body_.emplace<InstanceNorm2d>(width);
      body_.name_last("norm" + std::to_string(i));
    }
    body_.emplace<LeakyReLU>();
    prev = width;
  }
  body_.emplace<Conv2d>(prev, 1, 3, 1, 1, true, rng);
  body_.name_last("out");
}

Tensor Discriminator::forward(const Tensor& x, bool cache) {
  return body_.forward(x, cache);
}

Tensor Discriminator::backward(const Tensor& dy) { return body_.backward(dy); }

void Discriminator::collect_params(const std::string& prefix,
                                   std::vector<ParamRef>& out) {
  body_.collect_params(prefix, out);
}

// ---------------------------------------------------------------------------
// VaeModel

VaeModel::VaeModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_((cfg.validate(), cfg)),
      encoder_([&] {
        RngStream rng(mix_seed(init_seed, 1));
        return Encoder(cfg, rng);
      }()),
      decoder_a_([&] {
        RngStream rng(mix_seed(init_seed, 2));
        return Decoder(cfg, rng);
      }()),
      decoder_b_([&] {
        RngStream rng(mix_seed(init_seed, 3));
        return Decoder(cfg, rng);
      }()),
      discriminator_([&] {
        RngStream rng(mix_seed(init_seed, 4));
        return Discriminator(cfg, rng);
      }()) {}

LatentDistribution VaeModel::encode(const Tensor& x, bool cache) {
  const int factor = 1 << cfg_.downsample_stages;
  if (x.c != 1)
    throw ShapeError("encode: expected 1 channel, got " + std::to_string(x.c));
  if (x.h < 8 || x.w < 8 || x.h % factor != 0 || x.w % factor != 0)
    throw ShapeError("encode: input " + std::to_string(x.w) + "x" +
                     std::to_string(x.h) + " must be >= 8 and divisible by " +
                     std::to_string(factor));
  return encoder_.forward(x, cache);
}

Tensor VaeModel::encode_backward(const Tensor& d_mean,
                                 const Tensor& d_log_var) {
  return encoder_.backward(d_mean, d_log_var);
}

Tensor VaeModel::decode(Phase phase, const Tensor& z, bool cache) {
  return phase == Phase::A ? decoder_a_.forward(z, cache)
                           : decoder_b_.forward(z, cache);
}

Tensor VaeModel::decode_backward(Phase phase, const Tensor& dy) {
  return phase == Phase::A ? decoder_a_.backward(dy)
                           : decoder_b_.backward(dy);
}

Tensor VaeModel::discriminate(const Tensor& x, bool cache) {
  if (x.h != cfg_.input_h || x.w != cfg_.input_w)
    throw ShapeError("discriminate: expected " + std::to_string(cfg_.input_w) +
                     "x" + std::to_string(cfg_.input_h) + ", got " +
                     std::to_string(x.w) + "x" + std::to_string(x.h));
  return discriminator_.forward(x, cache);
}

Tensor VaeModel::discriminate_backward(const Tensor& dy) {
  return discriminator_.backward(dy);
}

std::vector<ParamRef> VaeModel::params(ParamScope scope) {
  std::vector<ParamRef> out;
  if (scope == ParamScope::generator || scope == ParamScope::all) {
    encoder_.collect_params("encoder", out);
    decoder_a_.collect_params("decoder_a", out);
    decoder_b_.collect_params("decoder_b", out);
  }
  if (scope == ParamScope::discriminator || scope == ParamScope::all)
    discriminator_.collect_params("discriminator", out);
  return out;
}

long VaeModel::count_parameters(ParamScope scope) {
  long count = 0;
  for (const auto& p : params(scope)) count += static_cast<long>(p.value->size());
  return count;
}

long count_parameters(VaeModel& model, ParamScope scope) {
  return model.count_parameters(scope);
}

}  // namespace fdavae
