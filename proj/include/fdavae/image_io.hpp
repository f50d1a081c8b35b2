#pragma once

#include <string>
#include <vector>

#include "fdavae/image.hpp"

namespace fdavae {

// 16-bit binary PGM (P5, maxval 65535). The declared value range maps
// linearly onto [0, 65535]; the range is stored in a comment line so the
// round trip restores it.
void write_pgm(const Image& image, const std::string& path);
Image read_pgm(const std::string& path);

// One manifest record: tab-separated sample_id, group_id, path_a, path_b.
struct ManifestRow {
  std::string sample_id;
  std::string group_id;
  std::string path_a;
  std::string path_b;
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path);

struct PreprocessConfig {
  double clip_top_fraction = 0.001;
  int target_h = 0;  // 0 keeps the stored size
  int target_w = 0;
};

// Loads pairs listed in the manifest, applying clip -> normalize -> resize.
// Paths are resolved relative to root_path unless absolute. With
// fail_fast=false, bad rows are skipped and described in *errors.
std::vector<PhasePair> load_pair_dataset(const std::string& root_path,
                                         const std::vector<ManifestRow>& rows,
                                         const PreprocessConfig& config,
                                         bool fail_fast = true,
                                         std::vector<std::string>* errors = nullptr);

}  // namespace fdavae
