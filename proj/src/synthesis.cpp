#include "fdavae/synthesis.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fdavae/errors.hpp"
#include "fdavae/image_io.hpp"
#include "fdavae/rng.hpp"

namespace fdavae {

namespace {

Image decode_single(VaeModel& model, Phase target, const Tensor& z) {
  Tensor out = model.decode(target, z);
  return tensor_to_image(out, 0);
}

}  // namespace

Image synthesize_cross_phase(VaeModel& model, const Image& x, Direction dir,
                             SynthesisMode mode, std::uint64_t seed,
                             bool use_flip) {
  std::vector<const Image*> batch{&x};
  LatentDistribution dist = model.encode(images_to_tensor(batch));
  if (use_flip) dist = flip(dist);

  const Phase target = dir == Direction::AtoB ? Phase::B : Phase::A;
  if (mode == SynthesisMode::deterministic)
    return decode_single(model, target, dist.mean);

  RngStream rng(seed);
  const LatentSample sample = reparameterize(dist, rng);
  return decode_single(model, target, sample.values);
}

Image reconstruct_self(VaeModel& model, const Image& x, Phase phase) {
  std::vector<const Image*> batch{&x};
  const LatentDistribution dist = model.encode(images_to_tensor(batch));
  return decode_single(model, phase, dist.mean);
}

SynthesisManifest synthesize_dataset(VaeModel& model,
                                     const std::vector<PhasePair>& pairs,
                                     Direction dir, const std::string& out_dir,
                                     bool use_flip, SynthesisMode mode,
                                     std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);

  SynthesisManifest manifest;
  std::uint64_t sample_index = 0;
  for (const auto& pair : pairs) {
    const Image& src = dir == Direction::AtoB ? pair.phase_a : pair.phase_b;
    const Image& dst = dir == Direction::AtoB ? pair.phase_b : pair.phase_a;
    const Image synth = synthesize_cross_phase(
        model, src, dir, mode, mix_seed(seed, sample_index++), use_flip);

    Image err(synth.height, synth.width, 0.0f, 2.0f);
    for (std::size_t i = 0; i < err.size(); ++i)
      err.pixels[i] = std::fabs(synth.pixels[i] - dst.pixels[i]);

    SynthesisRecord rec;
    rec.sample_id = pair.sample_id;
    rec.direction = dir;
    rec.psnr = psnr(synth, dst, 2.0);
    rec.ssim = ssim(synth, dst, 2.0);
    rec.out_path = pair.sample_id + "_" + to_string(dir) + "_synth.pgm";
    rec.err_path = pair.sample_id + "_" + to_string(dir) + "_err.pgm";
    try {
      write_pgm(synth, (fs::path(out_dir) / rec.out_path).string());
      write_pgm(err, (fs::path(out_dir) / rec.err_path).string());
      manifest.rows.push_back(std::move(rec));
    } catch (const std::exception& e) {
      manifest.errors.push_back("sample '" + pair.sample_id + "': " + e.what());
    }
  }

  std::ofstream f((fs::path(out_dir) / "synthesis.csv").string());
  if (!f) throw IoError("cannot write synthesis manifest in " + out_dir);
  f << "sample_id,direction,psnr,ssim,out_path,err_path\n";
  char line[320];
  for (const auto& r : manifest.rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.9g,%.9g,%s,%s\n",
                  r.sample_id.c_str(), to_string(r.direction).c_str(), r.psnr,
                  r.ssim, r.out_path.c_str(), r.err_path.c_str());
    f << line;
  }
  if (!f) throw IoError("synthesis manifest write failed in " + out_dir);
  return manifest;
}

}  // namespace fdavae
