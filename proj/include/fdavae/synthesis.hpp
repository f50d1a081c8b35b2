#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdavae/image.hpp"
#include "fdavae/metrics.hpp"
#include "fdavae/model.hpp"

namespace fdavae {

enum class SynthesisMode { deterministic, stochastic };

// Encode, flip the latent mean, decode with the target-phase decoder only.
// Deterministic mode decodes the flipped mean (epsilon = 0); stochastic mode
// decodes one reparameterized sample under `seed`. use_flip=false covers the
// backbone-ablation checkpoints, which are trained without mean flipping.
Image synthesize_cross_phase(VaeModel& model, const Image& x, Direction dir,
                             SynthesisMode mode = SynthesisMode::deterministic,
                             std::uint64_t seed = 0, bool use_flip = true);

// Same-phase decode of the unflipped latent mean.
Image reconstruct_self(VaeModel& model, const Image& x, Phase phase);

struct SynthesisRecord {
  std::string sample_id;
  Direction direction;
  double psnr = 0;
  double ssim = 0;
  std::string out_path;
  std::string err_path;
};

struct SynthesisManifest {
  std::vector<SynthesisRecord> rows;
  std::vector<std::string> errors;  // per-sample I/O failures
};

// Writes each synthesized image, its absolute-error map against the target,
// and a manifest CSV (sample_id,direction,psnr,ssim,out_path,err_path).
// Per-sample I/O failures are collected, not fatal. In stochastic mode each
// sample draws from a per-sample stream derived from `seed`.
SynthesisManifest synthesize_dataset(
    VaeModel& model, const std::vector<PhasePair>& pairs, Direction dir,
    const std::string& out_dir, bool use_flip = true,
    SynthesisMode mode = SynthesisMode::deterministic, std::uint64_t seed = 0);

}  // namespace fdavae
