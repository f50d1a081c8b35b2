// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the exit
// status is nonzero if any criterion fails. The desk-scale experiment uses
// 32x32 phantoms, 200 pairs, and a fixed seed throughout.

#include <doctest.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "fdavae/kernels.hpp"
#include "fdavae/layers.hpp"
#include "fdavae/losses.hpp"
#include "fdavae/metrics.hpp"
#include "fdavae/phantom.hpp"
#include "fdavae/synthesis.hpp"
#include "fdavae/trainer.hpp"

using namespace fdavae;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, const char* what, bool pass, double elapsed_s) {
  std::printf("[%s] criterion %d: %s (%.2f s)\n", pass ? "PASS" : "FAIL",
              criterion, what, elapsed_s);
  std::fflush(stdout);
}

// ---- shared desk-scale experiment state -----------------------------------

constexpr std::uint64_t kDeskSeed = 4242;
constexpr int kDeskEpochs = 10;

struct DeskData {
  std::vector<PhasePair> train;
  std::vector<PhasePair> val;
};

const DeskData& desk_data() {
  static const DeskData data = [] {
    PhantomSpec spec;
    spec.canvas_size = 32;
    spec.seed = kDeskSeed;
    spec.noise_sigma = 0.01;
    spec.gain_lo = 1.6;
    spec.gain_hi = 2.4;
    std::vector<PhasePair> pairs;
    pairs.reserve(200);
    for (int i = 0; i < 200; ++i)
      pairs.push_back(generate_phantom_pair(spec, i));
    SplitResult split = split_by_group(pairs, 4, 1, kDeskSeed);
    return DeskData{std::move(split.train), std::move(split.validation)};
  }();
  return data;
}

TrainConfig desk_config(AblationMode mode) {
  TrainConfig cfg;
  cfg.model = desk_scale_config();
  cfg.epochs = kDeskEpochs;
  cfg.batch_size = 8;
  cfg.seed = kDeskSeed;
  cfg.ablation = mode;
  cfg.quiet = true;
  return cfg;
}

struct DeskRun {
  std::vector<EpochRow> history;
  double initial_symmetry = 0;
  double final_psnr = 0;
  double final_symmetry = 0;
};

DeskRun run_desk(AblationMode mode, double lambda_fda_override = -1.0) {
  TrainConfig cfg = desk_config(mode);
  if (lambda_fda_override >= 0.0)
    cfg.loss_weights.lambda_fda = lambda_fda_override;
  Trainer trainer(cfg);
  DeskRun run;
  run.initial_symmetry =
      trainer.validate_epoch(desk_data().val).val_symmetry;
  run.history = trainer.train(desk_data().train, desk_data().val);
  run.final_psnr = run.history.back().val_psnr;
  run.final_symmetry = run.history.back().val_symmetry;
  return run;
}

const DeskRun& desk_full() {
  static const DeskRun run = run_desk(AblationMode::full);
  return run;
}

}  // namespace

TEST_CASE("criterion 1: closed-form KL and FDA values") {
  const auto start = Clock::now();
  bool pass = true;
  auto close = [&](double a, double b) {
    const bool ok = std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b));
    pass = pass && ok;
    CHECK(ok);
  };

  {
    std::vector<double> mu{0.0}, lv{0.0};
    close(kl_to_standard_normal<double>(mu, lv), 0.0);
    mu = {1.0};
    close(kl_to_standard_normal<double>(mu, lv), 0.5);
    mu = {0.0};
    lv = {1.0};
    close(kl_to_standard_normal<double>(mu, lv), (std::exp(1.0) - 2.0) / 2.0);
  }
  {
    std::vector<double> ma{0.7, -1.2}, mb{-0.7, 1.2}, la{0.3, -0.8},
        lb{0.3, -0.8};
    close(fda_loss_span<double>(ma, la, mb, lb), 0.0);
    ma = {1.0, 2.0};
    mb = {1.0, 2.0};
    la = {0.0, 0.0};
    lb = {0.0, 0.0};
    close(fda_loss_span<double>(ma, la, mb, lb), 3.0);
    ma = {0.0};
    mb = {0.0};
    la = {std::log(2.0)};
    lb = {0.0};
    close(fda_loss_span<double>(ma, la, mb, lb), 1.0);
  }
  {
    LossWeights w;
    close(total_loss(1, 1, 1, 1, 1, 1, w).total, 1.0400001);
  }

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 1.0;
  CHECK(elapsed < 1.0);
  report(1, "closed-form loss suite", pass, elapsed);
}

TEST_CASE("criterion 2: analytic gradients vs central differences") {
  const auto start = Clock::now();
  bool pass = true;
  RngStream rng(90210);
  const double h = 1e-4;
  const std::size_t len = 8;

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mu(len), lv(len);
    for (auto& v : mu) v = rng.uniform(-2.0, 2.0);
    for (auto& v : lv) v = rng.uniform(-1.5, 1.5);
    std::vector<double> dmu(len, 0.0), dlv(len, 0.0);
    kl_to_standard_normal_grad<double>(mu, lv, 1.0, dmu, dlv);
    for (std::size_t i = 0; i < len; ++i) {
      auto fd = [&](std::vector<double>& vec) {
        vec[i] += h;
        const double up = kl_to_standard_normal<double>(mu, lv);
        vec[i] -= 2 * h;
        const double dn = kl_to_standard_normal<double>(mu, lv);
        vec[i] += h;
        return (up - dn) / (2 * h);
      };
      const double fmu = fd(mu);
      const double flv = fd(lv);
      const bool ok_mu =
          std::fabs(fmu - dmu[i]) <= 1e-4 * std::max(1e-3, std::fabs(fmu));
      const bool ok_lv =
          std::fabs(flv - dlv[i]) <= 1e-4 * std::max(1e-3, std::fabs(flv));
      pass = pass && ok_mu && ok_lv;
      CHECK(ok_mu);
      CHECK(ok_lv);
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ma(len), la(len), mb(len), lb(len);
    for (std::size_t i = 0; i < len; ++i) {
      ma[i] = rng.uniform(-2.0, 2.0);
      mb[i] = -ma[i] + rng.uniform(0.1, 1.5) * (rng.uniform() < 0.5 ? 1 : -1);
      la[i] = rng.uniform(-1.0, 1.0);
      lb[i] = la[i] + rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? 1 : -1);
    }
    std::vector<double> dma(len, 0.0), dla(len, 0.0), dmb(len, 0.0),
        dlb(len, 0.0);
    fda_loss_grad<double>(ma, la, mb, lb, 1.0, dma, dla, dmb, dlb);
    auto value = [&] { return fda_loss_span<double>(ma, la, mb, lb); };
    auto check_vec = [&](std::vector<double>& vec, const std::vector<double>& g) {
      for (std::size_t i = 0; i < len; ++i) {
        vec[i] += h;
        const double up = value();
        vec[i] -= 2 * h;
        const double dn = value();
        vec[i] += h;
        const double fd = (up - dn) / (2 * h);
        const bool ok =
            std::fabs(fd - g[i]) <= 1e-4 * std::max(1e-3, std::fabs(fd));
        pass = pass && ok;
        CHECK(ok);
      }
    };
    check_vec(ma, dma);
    check_vec(la, dla);
    check_vec(mb, dmb);
    check_vec(lb, dlb);
  }

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 30.0;
  CHECK(elapsed < 30.0);
  report(2, "gradient suite (KL, FDA vs finite differences)", pass, elapsed);
}

TEST_CASE("criterion 3: oracle equivalence (ssim, psnr, attention, pca, perceptual)") {
  const auto start = Clock::now();
  bool pass = true;
  RngStream rng(777);

  // PSNR vs loop oracle, 1e-9.
  {
    Image a(24, 24), b(24, 24);
    for (auto& v : a.pixels) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : b.pixels) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
      mse += d * d;
    }
    mse /= a.size();
    const double expected = 10.0 * std::log10(4.0 / mse);
    const bool ok = std::fabs(psnr(a, b, 2.0) - expected) <= 1e-9;
    pass = pass && ok;
    CHECK(ok);
  }

  // SSIM vs direct sliding-window oracle, 1e-6.
  {
    Image a(32, 32), b(32, 32);
    for (auto& v : a.pixels) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < b.size(); ++i)
      b.pixels[i] = 0.8f * a.pixels[i] +
                    0.2f * static_cast<float>(rng.uniform(-1.0, 1.0));
    const int window = 11;
    const double sigma = 1.5;
    std::vector<double> kern(window * window);
    double ksum = 0.0;
    for (int y = 0; y < window; ++y)
      for (int x = 0; x < window; ++x) {
        const double dy = y - 5, dx = x - 5;
        kern[y * window + x] =
            std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
        ksum += kern[y * window + x];
      }
    for (auto& k : kern) k /= ksum;
    const double c1 = 4e-4, c2 = 36e-4;
    double acc = 0.0;
    int count = 0;
    for (int y = 0; y + window <= 32; ++y)
      for (int x = 0; x + window <= 32; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int wy = 0; wy < window; ++wy)
          for (int wx = 0; wx < window; ++wx) {
            const double va = a.at(y + wy, x + wx);
            const double vb = b.at(y + wy, x + wx);
            const double k = kern[wy * window + wx];
            mx += k * va;
            my += k * vb;
            xx += k * va * va;
            yy += k * vb * vb;
            xy += k * va * vb;
          }
        acc += ((2 * mx * my + c1) * (2 * (xy - mx * my) + c2)) /
               ((mx * mx + my * my + c1) *
                ((xx - mx * mx) + (yy - my * my) + c2));
        ++count;
      }
    const bool ok = std::fabs(ssim(a, b, 2.0) - acc / count) <= 1e-6;
    pass = pass && ok;
    CHECK(ok);
  }

  // Non-local attention vs dense oracle, 1e-5.
  {
    RngStream lrng(31337);
    NonLocalAttention attn(4, lrng);
    Tensor x(1, 4, 2, 2);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const Tensor y = attn.forward(x, false);

    const int inter = 2, positions = 4, c = 4;
    auto project = [&](const Conv2d& conv, int pos) {
      std::vector<double> out(inter, 0.0);
      for (int co = 0; co < inter; ++co)
        for (int ci = 0; ci < c; ++ci)
          out[co] += static_cast<double>(conv.weight.at(co, ci, 0, 0)) *
                     x.data[static_cast<std::size_t>(ci) * positions + pos];
      return out;
    };
    bool ok = true;
    for (int i = 0; i < positions; ++i) {
      std::vector<double> scores(positions, 0.0);
      for (int j = 0; j < positions; ++j) {
        const auto ti = project(attn.theta_, i);
        const auto pj = project(attn.phi_, j);
        for (int k = 0; k < inter; ++k) scores[j] += ti[k] * pj[k];
      }
      double mx = scores[0];
      for (const double s : scores) mx = std::max(mx, s);
      double z = 0.0;
      for (auto& s : scores) {
        s = std::exp(s - mx);
        z += s;
      }
      std::vector<double> agg(inter, 0.0);
      for (int j = 0; j < positions; ++j) {
        const auto gj = project(attn.g_, j);
        for (int k = 0; k < inter; ++k) agg[k] += scores[j] / z * gj[k];
      }
      for (int co = 0; co < c; ++co) {
        double val = attn.out_.bias.data[co];
        for (int k = 0; k < inter; ++k)
          val += static_cast<double>(attn.out_.weight.at(co, k, 0, 0)) * agg[k];
        val += x.data[static_cast<std::size_t>(co) * positions + i];
        ok = ok &&
             std::fabs(val - y.data[static_cast<std::size_t>(co) * positions +
                                    i]) <= 1e-5;
      }
    }
    pass = pass && ok;
    CHECK(ok);
  }

  // PCA vs dense 5x5 eigensolver (power iteration on the full covariance,
  // run to machine tolerance as the independent route), 1e-6.
  {
    const int dim = 5;
    std::vector<std::vector<float>> vecs;
    for (int i = 0; i < 20; ++i) {
      std::vector<float> v(dim);
      for (auto& xv : v) xv = static_cast<float>(rng.uniform(-1.0, 1.0));
      vecs.push_back(v);
    }
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : vecs)
      for (int j = 0; j < dim; ++j) mean[j] += v[j];
    for (auto& m : mean) m /= vecs.size();
    std::vector<double> cov(dim * dim, 0.0);
    for (const auto& v : vecs)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          cov[i * dim + j] += (v[i] - mean[i]) * (v[j] - mean[j]);
    for (auto& cv : cov) cv /= (vecs.size() - 1.0);

    // Dense eigensolver oracle: Jacobi sweeps on the explicit matrix.
    std::vector<double> m = cov, evec(dim * dim, 0.0);
    for (int i = 0; i < dim; ++i) evec[i * dim + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep)
      for (int p = 0; p < dim; ++p)
        for (int q = p + 1; q < dim; ++q) {
          if (std::fabs(m[p * dim + q]) < 1e-18) continue;
          const double theta =
              (m[q * dim + q] - m[p * dim + p]) / (2 * m[p * dim + q]);
          const double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1));
          const double ct = 1.0 / std::sqrt(t * t + 1), st = t * ct;
          for (int k = 0; k < dim; ++k) {
            const double mkp = m[k * dim + p], mkq = m[k * dim + q];
            m[k * dim + p] = ct * mkp - st * mkq;
            m[k * dim + q] = st * mkp + ct * mkq;
          }
          for (int k = 0; k < dim; ++k) {
            const double mpk = m[p * dim + k], mqk = m[q * dim + k];
            m[p * dim + k] = ct * mpk - st * mqk;
            m[q * dim + k] = st * mpk + ct * mqk;
          }
          for (int k = 0; k < dim; ++k) {
            const double vkp = evec[k * dim + p], vkq = evec[k * dim + q];
            evec[k * dim + p] = ct * vkp - st * vkq;
            evec[k * dim + q] = st * vkp + ct * vkq;
          }
        }
    std::array<int, 2> top = {0, 1};
    if (m[0] < m[1 * dim + 1]) top = {1, 0};
    for (int k = 2; k < dim; ++k) {
      const double v = m[k * dim + k];
      if (v > m[top[0] * dim + top[0]]) {
        top[1] = top[0];
        top[0] = k;
      } else if (v > m[top[1] * dim + top[1]]) {
        top[1] = k;
      }
    }

    const Projection2d proj = project_latents_2d(vecs);
    bool ok =
        std::fabs(proj.explained_variance[0] - m[top[0] * dim + top[0]]) <=
            1e-6 &&
        std::fabs(proj.explained_variance[1] - m[top[1] * dim + top[1]]) <=
            1e-6;
    for (int comp = 0; comp < 2 && ok; ++comp) {
      std::vector<double> axis(dim);
      for (int j = 0; j < dim; ++j) axis[j] = evec[j * dim + top[comp]];
      for (int j = 0; j < dim; ++j) {
        if (std::fabs(axis[j]) > 1e-12) {
          if (axis[j] < 0)
            for (auto& v : axis) v = -v;
          break;
        }
      }
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        double expected = 0.0;
        for (int j = 0; j < dim; ++j)
          expected += (vecs[i][j] - mean[j]) * axis[j];
        ok = ok && std::fabs(proj.coords[i][comp] - expected) <= 1e-6;
      }
    }
    pass = pass && ok;
    CHECK(ok);
  }

  // Perceptual distance vs straight-line loop reimplementation, 1e-5.
  {
    RandomFeatureDistance fd(0);
    Tensor a(1, 1, 12, 12), b(1, 1, 12, 12);
    for (auto& v : a.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : b.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    auto conv_loops = [](const std::vector<std::vector<std::vector<double>>>& in,
                         const Tensor& w, int stride) {
      const int ci_n = static_cast<int>(in.size());
      const int ih = static_cast<int>(in[0].size());
      const int iw = static_cast<int>(in[0][0].size());
      const int oh = (ih + 2 - 3) / stride + 1;
      const int ow = (iw + 2 - 3) / stride + 1;
      std::vector<std::vector<std::vector<double>>> out(
          w.n, std::vector<std::vector<double>>(oh, std::vector<double>(ow, 0.0)));
      for (int co = 0; co < w.n; ++co)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int ci = 0; ci < ci_n; ++ci)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = oy * stride - 1 + ky;
                  const int ix = ox * stride - 1 + kx;
                  if (iy < 0 || iy >= ih || ix < 0 || ix >= iw) continue;
                  acc += static_cast<double>(w.at(co, ci, ky, kx)) *
                         in[ci][iy][ix];
                }
            out[co][oy][ox] = acc > 0.0 ? acc : 0.2 * acc;  // leaky relu
          }
      return out;
    };
    auto img_to_planes = [](const Tensor& t) {
      std::vector<std::vector<std::vector<double>>> out(
          1, std::vector<std::vector<double>>(t.h, std::vector<double>(t.w)));
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) out[0][y][x] = t.at(0, 0, y, x);
      return out;
    };
    auto mean_abs_diff = [](const auto& fa, const auto& fb) {
      double acc = 0.0;
      std::size_t count = 0;
      for (std::size_t c = 0; c < fa.size(); ++c)
        for (std::size_t y = 0; y < fa[c].size(); ++y)
          for (std::size_t x = 0; x < fa[c][y].size(); ++x) {
            acc += std::fabs(fa[c][y][x] - fb[c][y][x]);
            ++count;
          }
      return acc / count;
    };

    const auto a1 = conv_loops(img_to_planes(a), fd.weights1(), 1);
    const auto b1 = conv_loops(img_to_planes(b), fd.weights1(), 1);
    const auto a2 = conv_loops(a1, fd.weights2(), 2);
    const auto b2 = conv_loops(b1, fd.weights2(), 2);
    const auto a3 = conv_loops(a2, fd.weights3(), 2);
    const auto b3 = conv_loops(b2, fd.weights3(), 2);
    const double oracle = mean_abs_diff(a1, b1) + mean_abs_diff(a2, b2) +
                          mean_abs_diff(a3, b3);
    const bool ok = std::fabs(fd.distance(a, b) - oracle) <= 1e-5;
    pass = pass && ok;
    CHECK(ok);
  }

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 60.0;
  CHECK(elapsed < 60.0);
  report(3, "oracle-equivalence suite", pass, elapsed);
}

TEST_CASE("criterion 4: generator parameter budget within 15% of 11.78M") {
  const auto start = Clock::now();
  VaeModel model(paper_scale_config(), 0);
  const long gen = model.count_parameters(ParamScope::generator);
  const double rel = std::fabs(gen - 11.78e6) / 11.78e6;
  const double elapsed = seconds_since(start);
  const bool pass = rel <= 0.15 && elapsed < 10.0;
  CHECK(rel <= 0.15);
  CHECK(elapsed < 10.0);
  std::printf("    generator parameters: %ld (%.1f%% from 11.78M)\n", gen,
              100.0 * rel);
  report(4, "parameter budget", pass, elapsed);
}

TEST_CASE("criterion 5: desk-scale end-to-end experiment") {
  const auto start = Clock::now();
  const DeskRun& full = desk_full();
  const DeskRun klfda = run_desk(AblationMode::kl_fda);
  const DeskRun backbone = run_desk(AblationMode::backbone_only);

  // (a) flip-alignment symmetry collapses by at least 5x.
  const bool pass_a = full.final_symmetry < full.initial_symmetry / 5.0;
  std::printf("    symmetry: initial %.4f -> final %.4f\n",
              full.initial_symmetry, full.final_symmetry);
  CHECK(pass_a);

  // (b) trained full model beats the copy-input baseline by >= 3 dB.
  double baseline = 0.0;
  for (const auto& pair : desk_data().val)
    baseline += psnr(pair.phase_a, pair.phase_b, 2.0);
  baseline /= desk_data().val.size();
  const bool pass_b = full.final_psnr >= baseline + 3.0;
  std::printf("    psnr: copy-input baseline %.2f dB, trained %.2f dB\n",
              baseline, full.final_psnr);
  CHECK(pass_b);

  // (c) ablation ordering with a 0.15 dB noise margin.
  const bool pass_c = full.final_psnr >= klfda.final_psnr - 0.15 &&
                      klfda.final_psnr >= backbone.final_psnr - 0.15;
  std::printf("    ablations: full %.2f, kl-fda %.2f, backbone %.2f dB\n",
              full.final_psnr, klfda.final_psnr, backbone.final_psnr);
  CHECK(pass_c);

  const double elapsed = seconds_since(start);
  report(5, "desk-scale end-to-end (a: symmetry/5, b: +3dB, c: ordering)",
         pass_a && pass_b && pass_c, elapsed);
}

TEST_CASE("criterion 6: determinism of full desk-scale reruns") {
  const auto start = Clock::now();
  const DeskRun& first = desk_full();
  const DeskRun second = run_desk(AblationMode::full);

  bool pass = first.history.size() == second.history.size();
  for (std::size_t e = 0; pass && e < first.history.size(); ++e) {
    const EpochRow& a = first.history[e];
    const EpochRow& b = second.history[e];
    const double cells_a[] = {double(a.epoch), double(a.step), a.rec, a.trans,
                              a.gan, a.perce, a.kl, a.fda, a.total, a.d_loss,
                              a.val_psnr, a.val_ssim, a.val_symmetry};
    const double cells_b[] = {double(b.epoch), double(b.step), b.rec, b.trans,
                              b.gan, b.perce, b.kl, b.fda, b.total, b.d_loss,
                              b.val_psnr, b.val_ssim, b.val_symmetry};
    for (int i = 0; i < 13; ++i)
      pass = pass && std::fabs(cells_a[i] - cells_b[i]) <= 1e-6;
  }
  CHECK(pass);
  report(6, "two identical desk-scale runs agree within 1e-6 per history cell",
         pass, seconds_since(start));
}

TEST_CASE("criterion 7: checkpoint resume equivalence") {
  namespace fs = std::filesystem;
  const auto start = Clock::now();
  const auto dir = fs::temp_directory_path() / "fdavae_acc_resume";
  fs::remove_all(dir);

  PhantomSpec spec;
  spec.canvas_size = 32;
  spec.seed = 99;
  spec.noise_sigma = 0.01;
  std::vector<PhasePair> pairs;
  for (int i = 0; i < 24; ++i) pairs.push_back(generate_phantom_pair(spec, i));
  const std::vector<PhasePair> val(pairs.begin(), pairs.begin() + 4);

  TrainConfig cfg = desk_config(AblationMode::full);
  cfg.epochs = 4;
  cfg.run_dir = (dir / "full").string();
  Trainer uninterrupted(cfg);
  uninterrupted.train(pairs, val);

  TrainConfig cfg_half = cfg;
  cfg_half.epochs = 2;
  cfg_half.run_dir = (dir / "half").string();
  Trainer half(cfg_half);
  half.train(pairs, val);

  TrainConfig cfg_resume = cfg;
  cfg_resume.run_dir = (dir / "resume").string();
  cfg_resume.resume_from = (dir / "half" / "last.bin").string();
  Trainer resumed(cfg_resume);
  resumed.train(pairs, val);

  auto pa = uninterrupted.model().params(ParamScope::all);
  auto pb = resumed.model().params(ParamScope::all);
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i].value->size(); ++k) {
      const double a = pa[i].value->data[k];
      const double b = pb[i].value->data[k];
      worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(a)));
    }
  const bool pass = worst <= 1e-5;
  CHECK(pass);
  std::printf("    worst relative parameter difference: %.3g\n", worst);
  fs::remove_all(dir);
  report(7, "interrupted+resumed training matches uninterrupted (1e-5)", pass,
         seconds_since(start));
}

TEST_CASE("criterion 8: disabling the alignment weight degrades symmetry 3x") {
  const auto start = Clock::now();
  const DeskRun& with_fda = desk_full();
  const DeskRun without = run_desk(AblationMode::full, 0.0);
  const bool pass = without.final_symmetry >= 3.0 * with_fda.final_symmetry;
  std::printf("    final symmetry: lambda_fda default %.4f, zero %.4f\n",
              with_fda.final_symmetry, without.final_symmetry);
  CHECK(pass);
  report(8, "symmetry-ablation contrast (lambda_fda = 0 vs default)", pass,
         seconds_since(start));
}
