#include "fdavae/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "fdavae/errors.hpp"
#include "fdavae/rng.hpp"

namespace fdavae {

void PhantomSpec::validate() const {
  if (canvas_size < 8)
    throw ConfigError("phantom: canvas_size must be >= 8");
  if (min_structures < 1 || max_structures < min_structures)
    throw ConfigError("phantom: invalid structure-count range");
  if (gain_hi < gain_lo)
    throw ConfigError("phantom: gain_hi < gain_lo");
  if (gain_lo <= 1.2 && gain_hi >= 0.8)
    throw ConfigError(
        "phantom: enhancement gain range must exclude 1.0 with margin >= 0.2, "
        "got [" + std::to_string(gain_lo) + ", " + std::to_string(gain_hi) + "]");
  if (noise_sigma < 0.0)
    throw ConfigError("phantom: noise_sigma must be >= 0");
}

namespace {

struct Ellipse {
  double cy, cx;      // center, pixel units
  double ry, rx;      // radii
  double angle;       // rotation
  double amplitude;   // added intensity in phase A
  double gain;        // phase-B multiplier when enhancing
  bool enhancing;
};

// Smooth membership in [0, 1]: 1 well inside, 0 outside, soft edge.
double ellipse_mask(const Ellipse& e, double y, double x) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double dy = y - e.cy, dx = x - e.cx;
  const double u = (c * dx + s * dy) / e.rx;
  const double v = (-s * dx + c * dy) / e.ry;
  const double d2 = u * u + v * v;
  if (d2 >= 1.0) return 0.0;
  const double t = 1.0 - d2;
  return t * t * (3.0 - 2.0 * t);  // smoothstep edge falloff
}

}  // namespace

PhasePair generate_phantom_pair(const PhantomSpec& spec, int index) {
  if (spec.canvas_size < 8)
    throw ConfigError("phantom: canvas_size must be >= 8");
  if (spec.min_structures < 1 || spec.max_structures < spec.min_structures)
    throw ConfigError("phantom: invalid structure-count range");
  if (spec.gain_hi < spec.gain_lo || spec.noise_sigma < 0.0)
    throw ConfigError("phantom: invalid gain/noise ranges");
  if (index < 0) throw ConfigError("phantom: index must be >= 0");

  RngStream rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const int size = spec.canvas_size;

  // Smooth background: gentle ramp plus one broad bump, values ~[0.08, 0.35].
  const double ramp_x = rng.uniform(-0.06, 0.06);
  const double ramp_y = rng.uniform(-0.06, 0.06);
  const double bump_cy = rng.uniform(0.25, 0.75) * size;
  const double bump_cx = rng.uniform(0.25, 0.75) * size;
  const double bump_r = rng.uniform(0.4, 0.8) * size;
  const double bump_amp = rng.uniform(0.04, 0.10);

  const int n_structs =
      spec.min_structures +
      static_cast<int>(rng.uniform_index(
          static_cast<std::uint64_t>(spec.max_structures - spec.min_structures + 1)));

  std::vector<Ellipse> ellipses(n_structs);
  int enhancing_count = 0;
  for (auto& e : ellipses) {
    e.cy = rng.uniform(0.15, 0.85) * size;
    e.cx = rng.uniform(0.15, 0.85) * size;
    e.ry = rng.uniform(0.06, 0.22) * size;
    e.rx = rng.uniform(0.06, 0.22) * size;
    e.angle = rng.uniform(0.0, 3.14159265358979323846);
    e.amplitude = rng.uniform(0.18, 0.38);
    e.gain = rng.uniform(spec.gain_lo, spec.gain_hi);
    e.enhancing = rng.uniform() < 0.5;
    if (e.enhancing) ++enhancing_count;
  }
  if (enhancing_count == 0) ellipses.front().enhancing = true;

  Image a(size, size);
  Image b(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double bg =
          0.18 + ramp_x * (2.0 * x / size - 1.0) + ramp_y * (2.0 * y / size - 1.0) +
          bump_amp * std::exp(-((y - bump_cy) * (y - bump_cy) +
                                (x - bump_cx) * (x - bump_cx)) /
                              (bump_r * bump_r));
      double va = bg;
      double enh = 1.0;  // phase-B multiplier accumulated over enhancing masks
      for (const auto& e : ellipses) {
        const double m = ellipse_mask(e, y, x);
        if (m <= 0.0) continue;
        va += e.amplitude * m;
        if (e.enhancing) enh *= 1.0 + (e.gain - 1.0) * m;
      }
      const double vb = va * enh;
      a.at(y, x) = static_cast<float>(std::min(va, 1.0));
      b.at(y, x) = static_cast<float>(std::min(vb, 1.0));
    }
  }

  // Independent per-phase noise, then map [0,1] -> [-1,1] and clamp.
  auto finish = [&](Image& img) {
    for (auto& v : img.pixels) {
      double val = v;
      if (spec.noise_sigma > 0.0) val += rng.normal(0.0, spec.noise_sigma);
      val = 2.0 * val - 1.0;
      v = static_cast<float>(std::clamp(val, -1.0, 1.0));
    }
    img.range_lo = -1.0f;
    img.range_hi = 1.0f;
  };
  finish(a);
  finish(b);

  PhasePair pair;
  pair.phase_a = std::move(a);
  pair.phase_b = std::move(b);
  pair.group_id = "g" + std::to_string(n_structs);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%05d", index);
  pair.sample_id = buf;
  return pair;
}

SplitResult split_by_group(const std::vector<PhasePair>& pairs,
                           int train_parts, int val_parts,
                           std::uint64_t seed) {
  if (train_parts < 1 || val_parts < 1)
    throw ConfigError("split_by_group: parts must be >= 1");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].group_id.empty())
      throw ConfigError("split_by_group: pair '" + pairs[i].sample_id +
                        "' has empty group_id");
    groups[pairs[i].group_id].push_back(i);
  }

  SplitResult result;
  const int parts = train_parts + val_parts;
  std::uint64_t group_index = 0;
  for (auto& [group_id, indices] : groups) {
    // Stable order before shuffling so the split depends only on content.
    std::sort(indices.begin(), indices.end(), [&](std::size_t l, std::size_t r) {
      return pairs[l].sample_id < pairs[r].sample_id;
    });
    RngStream rng(mix_seed(seed, group_index++));
    for (std::size_t i = indices.size(); i > 1; --i)
      std::swap(indices[i - 1], indices[rng.uniform_index(i)]);

    const std::size_t n = indices.size();
    if (n < static_cast<std::size_t>(parts)) {
      result.warnings.push_back("group '" + group_id + "' has only " +
                                std::to_string(n) + " samples (< " +
                                std::to_string(parts) +
                                "); assigning all to training");
      for (auto i : indices) result.train.push_back(pairs[i]);
      continue;
    }
    const std::size_t n_val = n * static_cast<std::size_t>(val_parts) /
                              static_cast<std::size_t>(parts);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_val)
        result.validation.push_back(pairs[indices[i]]);
      else
        result.train.push_back(pairs[indices[i]]);
    }
  }
  return result;
}

std::vector<ManifestRow> write_phantom_dataset(const PhantomSpec& spec, int n,
                                               const std::string& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create directory: " + root);

  std::vector<ManifestRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    PhasePair pair = generate_phantom_pair(spec, i);
    ManifestRow row;
    row.sample_id = pair.sample_id;
    row.group_id = pair.group_id;
    row.path_a = pair.sample_id + "_a.pgm";
    row.path_b = pair.sample_id + "_b.pgm";
    write_pgm(pair.phase_a, (fs::path(root) / row.path_a).string());
    write_pgm(pair.phase_b, (fs::path(root) / row.path_b).string());
    rows.push_back(std::move(row));
  }
  write_manifest(rows, (fs::path(root) / "manifest.tsv").string());
  return rows;
}

}  // namespace fdavae
