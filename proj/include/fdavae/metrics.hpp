#pragma once

#include <array>
#include <string>
#include <vector>

#include "fdavae/image.hpp"
#include "fdavae/losses.hpp"
#include "fdavae/model.hpp"

namespace fdavae {

// 10*log10(data_range^2 / MSE); identical images return the documented
// 100 dB cap instead of infinity.
double psnr(const Image& a, const Image& b, double data_range);

// Mean local SSIM with an 11-tap Gaussian window (sigma 1.5), k1=0.01,
// k2=0.03, over valid window positions. Images must be at least window-sized.
double ssim(const Image& a, const Image& b, double data_range,
            int window = 11, double sigma = 1.5, double k1 = 0.01,
            double k2 = 0.03);

struct SymmetryRow {
  std::string sample_id;
  double mu_term = 0;   // mean |mu_A + mu_B| over latent elements
  double var_term = 0;  // mean |var_A - var_B|
};

// The two flip-alignment penalty terms evaluated in inference mode (no
// sampling), per pair and aggregated by mean over the dataset.
struct SymmetryReport {
  double mean_abs_mu_sum = 0;
  double mean_abs_var_diff = 0;
  std::vector<SymmetryRow> rows;
};

SymmetryReport latent_symmetry_report(VaeModel& model,
                                      const std::vector<PhasePair>& pairs);

struct Projection2d {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> explained_variance = {0, 0};
  std::array<bool, 2> degenerate = {false, false};
};

// Top-2 PCA by power iteration with deflation (tolerance 1e-9, at most
// 10000 iterations), on centered data under the sample-covariance (n-1)
// convention. Sign convention: the first nonzero coordinate of each
// component is positive. Requires at least 3 vectors.
Projection2d project_latents_2d(const std::vector<std::vector<float>>& vectors);

enum class Direction { AtoB, BtoA };
std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct EvalCell {
  Direction direction;
  std::string metric;  // psnr | ssim | perce_dist
  double mean = 0;
  double std_dev = 0;
  int n = 0;
};

// Deterministic-mode synthesis quality over a validation set, mean and
// population std per direction and metric.
std::vector<EvalCell> evaluate(VaeModel& model,
                               const std::vector<PhasePair>& pairs,
                               const std::vector<Direction>& directions,
                               const FeatureDistance& perceptual,
                               bool use_flip = true);

// CSV: direction,metric,mean,std,n
void write_eval_report(const std::vector<EvalCell>& cells,
                       const std::string& path);

// Batch conversion helpers shared by trainer/synthesis/diagnostics.
Tensor images_to_tensor(const std::vector<const Image*>& images);
Image tensor_to_image(const Tensor& batch, int index);

}  // namespace fdavae
