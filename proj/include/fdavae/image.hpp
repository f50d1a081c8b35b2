#pragma once

#include <string>
#include <vector>

namespace fdavae {

// Single-channel 2-D raster with a declared value range. The canonical
// training range is [-1, 1].
struct Image {
  int height = 0, width = 0;
  std::vector<float> pixels;
  float range_lo = -1.0f, range_hi = 1.0f;

  Image() = default;
  Image(int h, int w, float lo = -1.0f, float hi = 1.0f)
      : height(h), width(w),
        pixels(static_cast<std::size_t>(h) * w, 0.0f),
        range_lo(lo), range_hi(hi) {}

  float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return pixels.size(); }
};

// Registered two-phase pair sharing anatomy; group_id drives grouped
// train/validation splitting.
struct PhasePair {
  Image phase_a;
  Image phase_b;
  std::string group_id;
  std::string sample_id;
};

// Empirical quantile by sorting with linear interpolation between order
// statistics, q in [0, 1].
float quantile(const std::vector<float>& values, double q);

// Values above the (1 - top_fraction) quantile are set to that quantile.
// Requires 0 <= top_fraction < 0.5.
Image clip_intensities(const Image& image, double top_fraction);

// Min-max rescale to [-1, 1]; a constant image maps to all zeros.
Image normalize(const Image& image);

// Area-average when shrinking by integer factors, bilinear otherwise.
Image resize(const Image& image, int target_h, int target_w);

// Throws if any pixel falls outside the declared range (with a small
// float-rounding allowance).
void assert_in_range(const Image& image, const char* context);

}  // namespace fdavae
