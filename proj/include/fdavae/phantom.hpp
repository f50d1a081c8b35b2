#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdavae/image.hpp"
#include "fdavae/image_io.hpp"

namespace fdavae {

// Parameters for procedural paired-phase phantoms: shared elliptical
// structures on a smooth background, with designated "enhancing" regions
// whose intensity is remapped by a gain in phase B.
struct PhantomSpec {
  int canvas_size = 64;
  int min_structures = 3;
  int max_structures = 7;
  double gain_lo = 1.6;
  double gain_hi = 2.4;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  // Enforces the documented invariants, including the rule that the gain
  // range must exclude 1.0 with margin >= 0.2 so the phases stay measurably
  // distinct. Tests may bypass this to probe the gain=1 degenerate case.
  void validate() const;
};

// Deterministic function of (spec.seed, index). Both phases share geometry;
// phase B scales intensity inside enhancing structures; both then receive
// independent additive noise. Output range is [-1, 1].
PhasePair generate_phantom_pair(const PhantomSpec& spec, int index);

struct SplitResult {
  std::vector<PhasePair> train;
  std::vector<PhasePair> validation;
  std::vector<std::string> warnings;
};

// Splits within each group_id at train_parts : val_parts, deterministically
// under `seed`. Groups smaller than train_parts + val_parts go entirely to
// training, with a warning.
SplitResult split_by_group(const std::vector<PhasePair>& pairs,
                           int train_parts, int val_parts,
                           std::uint64_t seed);

// Writes <root>/<sample_id>_a.pgm, <root>/<sample_id>_b.pgm for n pairs plus
// <root>/manifest.tsv; returns the manifest rows.
std::vector<ManifestRow> write_phantom_dataset(const PhantomSpec& spec, int n,
                                               const std::string& root);

}  // namespace fdavae
