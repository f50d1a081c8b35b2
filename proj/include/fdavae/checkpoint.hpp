#pragma once

#include <cstdint>
#include <string>

#include "fdavae/layers.hpp"
#include "fdavae/model.hpp"

namespace fdavae {

enum class AblationMode { backbone_only, kl_fda, full };

std::string to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& s);

struct CheckpointMeta {
  ModelConfig model;
  AblationMode ablation = AblationMode::full;
  long step = 0;
  int epoch = 0;
  double best_val_psnr = -1e300;
  std::string sample_rng_state;
  std::uint64_t perce_seed = 0;
};

// Single-file binary archive: version tag, JSON metadata (config, counters,
// RNG state, parameter manifest), named parameter tensors, Adam moments, and
// a trailing checksum. Written atomically via a temp file.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     VaeModel& model, Adam* opt_gen, Adam* opt_disc);

// Reads only the metadata block (to construct a matching model first).
CheckpointMeta read_checkpoint_meta(const std::string& path);

// Restores parameters (and optimizer moments when opt_gen/opt_disc are
// given) into an already-constructed model. Validates the stored parameter
// manifest against the model and fails,
// without mutating anything, on the first mismatched name or shape.
CheckpointMeta load_checkpoint(const std::string& path, VaeModel& model,
                               Adam* opt_gen, Adam* opt_disc);

}  // namespace fdavae
