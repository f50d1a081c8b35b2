#include "fdavae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fdavae/errors.hpp"
#include "fdavae/synthesis.hpp"

namespace fdavae {

namespace {

void check_same_size(const Image& a, const Image& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError(std::string(what) + ": image sizes differ (" +
                     std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
}

}  // namespace

double psnr(const Image& a, const Image& b, double data_range) {
  check_same_size(a, b, "psnr");
  if (data_range <= 0.0) throw ConfigError("psnr: data_range must be > 0");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Image& a, const Image& b, double data_range, int window,
            double sigma, double k1, double k2) {
  check_same_size(a, b, "ssim");
  if (a.height < window || a.width < window)
    throw ConfigError("ssim: image smaller than the " + std::to_string(window) +
                      "-tap window");

  std::vector<double> kernel(window);
  const int half = window / 2;
  double ksum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - half;
    kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;

  const int h = a.height, w = a.width;
  const int oh = h - window + 1, ow = w - window + 1;

  // Separable Gaussian filtering (valid mode) of x, y, x^2, y^2, xy.
  auto filter = [&](auto&& value_at) {
    std::vector<double> horiz(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int k = 0; k < window; ++k) acc += kernel[k] * value_at(y, x + k);
        horiz[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int k = 0; k < window; ++k)
          acc += kernel[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    return out;
  };

  const auto mu_x = filter([&](int y, int x) { return double(a.at(y, x)); });
  const auto mu_y = filter([&](int y, int x) { return double(b.at(y, x)); });
  const auto xx = filter([&](int y, int x) {
    return double(a.at(y, x)) * a.at(y, x);
  });
  const auto yy = filter([&](int y, int x) {
    return double(b.at(y, x)) * b.at(y, x);
  });
  const auto xy = filter([&](int y, int x) {
    return double(a.at(y, x)) * b.at(y, x);
  });

  const double c1 = (k1 * data_range) * (k1 * data_range);
  const double c2 = (k2 * data_range) * (k2 * data_range);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double var_x = xx[i] - mx * mx;
    const double var_y = yy[i] - my * my;
    const double cov = xy[i] - mx * my;
    acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
           ((mx * mx + my * my + c1) * (var_x + var_y + c2));
  }
  return acc / static_cast<double>(mu_x.size());
}

// ---------------------------------------------------------------------------
// Latent diagnostics

SymmetryReport latent_symmetry_report(VaeModel& model,
                                      const std::vector<PhasePair>& pairs) {
  if (pairs.empty())
    throw ConfigError("latent_symmetry_report: empty dataset");
  SymmetryReport report;
  report.rows.reserve(pairs.size());

  const int chunk = 16;
  for (std::size_t start = 0; start < pairs.size();
       start += static_cast<std::size_t>(chunk)) {
    const std::size_t count = std::min<std::size_t>(chunk, pairs.size() - start);
    std::vector<const Image*> imgs_a, imgs_b;
    for (std::size_t i = 0; i < count; ++i) {
      imgs_a.push_back(&pairs[start + i].phase_a);
      imgs_b.push_back(&pairs[start + i].phase_b);
    }
    LatentDistribution da = model.encode(images_to_tensor(imgs_a));
    LatentDistribution db = model.encode(images_to_tensor(imgs_b));
    const std::size_t stride = da.mean.size() / count;
    for (std::size_t i = 0; i < count; ++i) {
      double mu_acc = 0.0, var_acc = 0.0;
      for (std::size_t k = 0; k < stride; ++k) {
        const std::size_t idx = i * stride + k;
        mu_acc += std::fabs(static_cast<double>(da.mean.data[idx]) +
                            db.mean.data[idx]);
        var_acc += std::fabs(std::exp(double(da.log_var.data[idx])) -
                             std::exp(double(db.log_var.data[idx])));
      }
      report.rows.push_back({pairs[start + i].sample_id,
                             mu_acc / static_cast<double>(stride),
                             var_acc / static_cast<double>(stride)});
    }
  }
  for (const auto& row : report.rows) {
    report.mean_abs_mu_sum += row.mu_term;
    report.mean_abs_var_diff += row.var_term;
  }
  report.mean_abs_mu_sum /= static_cast<double>(report.rows.size());
  report.mean_abs_var_diff /= static_cast<double>(report.rows.size());
  return report;
}

Projection2d project_latents_2d(const std::vector<std::vector<float>>& vectors) {
  if (vectors.size() < 3)
    throw ConfigError("project_latents_2d: need at least 3 vectors, got " +
                      std::to_string(vectors.size()));
  const std::size_t n = vectors.size();
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim)
      throw ShapeError("project_latents_2d: inconsistent vector lengths");

  // Centered data, double precision.
  std::vector<double> centered(n * dim);
  std::vector<double> mean(dim, 0.0);
  for (const auto& v : vectors)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  double total_var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = vectors[i][j] - mean[j];
      centered[i * dim + j] = c;
      total_var += c * c;
    }
  total_var /= static_cast<double>(n - 1);

  Projection2d result;
  result.coords.assign(n, {0.0, 0.0});
  if (total_var < 1e-24) {
    result.degenerate = {true, true};
    return result;
  }

  // Implicit covariance matvec: C v = A^T (A v) / (n - 1).
  auto matvec = [&](const std::vector<double>& v, std::vector<double>& out) {
    std::vector<double> av(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = centered.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) acc += row[j] * v[j];
      av[i] = acc;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = centered.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) out[j] += row[j] * av[i];
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (auto& o : out) o *= inv;
  };

  std::array<std::vector<double>, 2> components;
  std::array<double, 2> eigenvalues = {0.0, 0.0};

  RngStream rng(0x50CA0001ull);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;

    std::vector<double> w(dim);
    bool converged = false;
    for (int iter = 0; iter < 10000; ++iter) {
      matvec(v, w);
      if (comp == 1) {
        // Deflate the first component.
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += components[0][j] * v[j];
        for (std::size_t j = 0; j < dim; ++j)
          w[j] -= eigenvalues[0] * components[0][j] * dot;
      }
      double wnorm = 0.0;
      for (const double x : w) wnorm += x * x;
      wnorm = std::sqrt(wnorm);
      if (wnorm < 1e-18 * std::max(1.0, total_var)) {
        result.degenerate[comp] = true;
        break;
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double next = w[j] / wnorm;
        diff += (next - v[j]) * (next - v[j]);
        v[j] = next;
      }
      if (std::sqrt(diff) < 1e-9) {
        converged = true;
        break;
      }
    }
    (void)converged;

    // Rayleigh quotient under the deflated operator.
    matvec(v, w);
    if (comp == 1) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += components[0][j] * v[j];
      for (std::size_t j = 0; j < dim; ++j)
        w[j] -= eigenvalues[0] * components[0][j] * dot;
    }
    double lambda = 0.0;
    for (std::size_t j = 0; j < dim; ++j) lambda += v[j] * w[j];
    eigenvalues[comp] = std::max(0.0, lambda);

    // Sign convention: first coordinate with magnitude above 1e-12 positive.
    for (std::size_t j = 0; j < dim; ++j) {
      if (std::fabs(v[j]) > 1e-12) {
        if (v[j] < 0.0)
          for (auto& x : v) x = -x;
        break;
      }
    }
    components[comp] = v;
  }

  result.explained_variance = eigenvalues;
  for (int comp = 0; comp < 2; ++comp)
    if (eigenvalues[comp] <= 1e-14 * total_var) result.degenerate[comp] = true;

  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * dim;
    for (int comp = 0; comp < 2; ++comp) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += row[j] * components[comp][j];
      result.coords[i][comp] = acc;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Direction, evaluation report

std::string to_string(Direction d) {
  return d == Direction::AtoB ? "a2b" : "b2a";
}

Direction direction_from_string(const std::string& s) {
  if (s == "a2b" || s == "AtoB" || s == "A2B") return Direction::AtoB;
  if (s == "b2a" || s == "BtoA" || s == "B2A") return Direction::BtoA;
  throw ConfigError("unknown direction '" + s + "' (expected a2b or b2a)");
}

std::vector<EvalCell> evaluate(VaeModel& model,
                               const std::vector<PhasePair>& pairs,
                               const std::vector<Direction>& directions,
                               const FeatureDistance& perceptual,
                               bool use_flip) {
  if (pairs.empty()) throw ConfigError("evaluate: empty dataset");

  std::vector<EvalCell> cells;
  for (const Direction dir : directions) {
    std::vector<double> v_psnr, v_ssim, v_perce;
    v_psnr.reserve(pairs.size());
    for (const auto& pair : pairs) {
      const Image& src = dir == Direction::AtoB ? pair.phase_a : pair.phase_b;
      const Image& dst = dir == Direction::AtoB ? pair.phase_b : pair.phase_a;
      const Image synth = synthesize_cross_phase(
          model, src, dir, SynthesisMode::deterministic, 0, use_flip);
      v_psnr.push_back(psnr(synth, dst, 2.0));
      v_ssim.push_back(ssim(synth, dst, 2.0));
      std::vector<const Image*> sp{&synth}, dp{&dst};
      v_perce.push_back(
          perceptual.distance(images_to_tensor(sp), images_to_tensor(dp)));
    }
    auto push = [&](const char* metric, const std::vector<double>& values) {
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (const double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());  // population std
      cells.push_back(
          {dir, metric, mean, std::sqrt(var), static_cast<int>(values.size())});
    };
    push("psnr", v_psnr);
    push("ssim", v_ssim);
    push("perce_dist", v_perce);
  }
  return cells;
}

void write_eval_report(const std::vector<EvalCell>& cells,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report: " + path);
  f << "direction,metric,mean,std,n\n";
  char line[160];
  for (const auto& c : cells) {
    std::snprintf(line, sizeof(line), "%s,%s,%.9g,%.9g,%d\n",
                  to_string(c.direction).c_str(), c.metric.c_str(), c.mean,
                  c.std_dev, c.n);
    f << line;
  }
  if (!f) throw IoError("report write failed: " + path);
}

// ---------------------------------------------------------------------------
// Batch conversion

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ConfigError("images_to_tensor: empty batch");
  const int h = images.front()->height, w = images.front()->width;
  Tensor t(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w)
      throw ShapeError("images_to_tensor: mixed image sizes in batch");
    std::copy(images[i]->pixels.begin(), images[i]->pixels.end(),
              t.plane(static_cast<int>(i), 0));
  }
  return t;
}

Image tensor_to_image(const Tensor& batch, int index) {
  Image img(batch.h, batch.w);
  const float* src = batch.plane(index, 0);
  std::copy(src, src + img.size(), img.pixels.begin());
  return img;
}

}  // namespace fdavae
