#include "fdavae/image.hpp"

#include <algorithm>
#include <cmath>

#include "fdavae/errors.hpp"

namespace fdavae {

float quantile(const std::vector<float>& values, double q) {
  if (values.empty()) throw ConfigError("quantile of empty value set");
  std::vector<float> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<float>((1.0 - frac) * sorted[lo] + frac * sorted[hi]);
}

Image clip_intensities(const Image& image, double top_fraction) {
  if (top_fraction < 0.0 || top_fraction >= 0.5)
    throw ConfigError("clip_intensities: top_fraction must be in [0, 0.5), got " +
                      std::to_string(top_fraction));
  if (top_fraction == 0.0) return image;
  const float q = quantile(image.pixels, 1.0 - top_fraction);
  Image out = image;
  for (auto& v : out.pixels) v = std::min(v, q);
  return out;
}

Image normalize(const Image& image) {
  Image out = image;
  out.range_lo = -1.0f;
  out.range_hi = 1.0f;
  const auto [mn_it, mx_it] =
      std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) {
    std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
    return out;
  }
  const double inv_span = 1.0 / (mx - mn);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double u = (image.pixels[i] - mn) * inv_span;
    out.pixels[i] = static_cast<float>(2.0 * u - 1.0);
  }
  return out;
}

namespace {

Image resize_block_mean(const Image& image, int target_h, int target_w) {
  const int fy = image.height / target_h;
  const int fx = image.width / target_w;
  Image out(target_h, target_w, image.range_lo, image.range_hi);
  const double inv = 1.0 / (static_cast<double>(fy) * fx);
  for (int oy = 0; oy < target_h; ++oy)
    for (int ox = 0; ox < target_w; ++ox) {
      double acc = 0.0;
      for (int dy = 0; dy < fy; ++dy)
        for (int dx = 0; dx < fx; ++dx)
          acc += image.at(oy * fy + dy, ox * fx + dx);
      out.at(oy, ox) = static_cast<float>(acc * inv);
    }
  return out;
}

Image resize_bilinear(const Image& image, int target_h, int target_w) {
  Image out(target_h, target_w, image.range_lo, image.range_hi);
  const double sy = static_cast<double>(image.height) / target_h;
  const double sx = static_cast<double>(image.width) / target_w;
  for (int oy = 0; oy < target_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < target_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * image.at(y0, x0) + wx * image.at(y0, x1);
      const double bot = (1.0 - wx) * image.at(y1, x0) + wx * image.at(y1, x1);
      out.at(oy, ox) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

}  // namespace

Image resize(const Image& image, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1)
    throw ConfigError("resize: target dimensions must be >= 1");
  if (target_h == image.height && target_w == image.width) return image;
  const bool integer_shrink =
      image.height % target_h == 0 && image.width % target_w == 0 &&
      image.height >= target_h && image.width >= target_w;
  return integer_shrink ? resize_block_mean(image, target_h, target_w)
                        : resize_bilinear(image, target_h, target_w);
}

void assert_in_range(const Image& image, const char* context) {
  const float slack =
      1e-5f * std::max(1.0f, std::fabs(image.range_hi - image.range_lo));
  for (const float v : image.pixels) {
    if (!(v >= image.range_lo - slack && v <= image.range_hi + slack))
      throw Error(std::string(context) + ": pixel value " + std::to_string(v) +
                  " outside declared range [" + std::to_string(image.range_lo) +
                  ", " + std::to_string(image.range_hi) + "]");
  }
}

}  // namespace fdavae
