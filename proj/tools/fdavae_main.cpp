// Command-line entry point: dataset generation, training (with ablation
// modes), cross-phase synthesis, evaluation, and latent diagnostics.
//
// Exit codes: 0 ok, 2 usage/config error (including missing or incompatible
// checkpoints), 3 I/O failure, 4 training divergence, 5 partial per-sample
// failures.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdavae/checkpoint.hpp"
#include "fdavae/errors.hpp"
#include "fdavae/image_io.hpp"
#include "fdavae/metrics.hpp"
#include "fdavae/phantom.hpp"
#include "fdavae/synthesis.hpp"
#include "fdavae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string run_dir = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

struct RunConfig {
  fdavae::TrainConfig train;
  std::string manifest;
  fdavae::PreprocessConfig prep;
  int split_train_parts = 4;
  int split_val_parts = 1;
};

void apply_json(const json& j, RunConfig& cfg) {
  if (j.contains("model")) {
    const auto& m = j["model"];
    auto& mc = cfg.train.model;
    mc.input_h = m.value("input_h", m.value("input_size", mc.input_h));
    mc.input_w = m.value("input_w", m.value("input_size", mc.input_w));
    mc.base_channels = m.value("base_channels", mc.base_channels);
    mc.latent_channels = m.value("latent_channels", mc.latent_channels);
    mc.downsample_stages = m.value("downsample_stages", mc.downsample_stages);
    mc.residual_blocks_per_coder =
        m.value("residual_blocks_per_coder", mc.residual_blocks_per_coder);
    mc.attention_blocks_per_coder =
        m.value("attention_blocks_per_coder", mc.attention_blocks_per_coder);
    mc.discriminator_stages =
        m.value("discriminator_stages", mc.discriminator_stages);
    mc.max_width_multiplier =
        m.value("max_width_multiplier", mc.max_width_multiplier);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    cfg.train.checkpoint_every =
        t.value("checkpoint_every", cfg.train.checkpoint_every);
    if (t.contains("ablation"))
      cfg.train.ablation =
          fdavae::ablation_from_string(t["ablation"].get<std::string>());
    cfg.train.perce_seed = t.value("perce_seed", cfg.train.perce_seed);
    if (t.contains("loss_weights")) {
      const auto& w = t["loss_weights"];
      cfg.train.loss_weights.lambda_rec =
          w.value("rec", cfg.train.loss_weights.lambda_rec);
      cfg.train.loss_weights.lambda_gan =
          w.value("gan", cfg.train.loss_weights.lambda_gan);
      cfg.train.loss_weights.lambda_perce =
          w.value("perce", cfg.train.loss_weights.lambda_perce);
      cfg.train.loss_weights.lambda_fda =
          w.value("fda", cfg.train.loss_weights.lambda_fda);
      cfg.train.loss_weights.lambda_kl =
          w.value("kl", cfg.train.loss_weights.lambda_kl);
    }
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    cfg.manifest = d.value("manifest", cfg.manifest);
    cfg.prep.clip_top_fraction =
        d.value("clip_top_fraction", cfg.prep.clip_top_fraction);
    if (d.contains("resize")) {
      cfg.prep.target_h = d["resize"].get<int>();
      cfg.prep.target_w = cfg.prep.target_h;
    }
    cfg.split_train_parts = d.value("train_parts", cfg.split_train_parts);
    cfg.split_val_parts = d.value("val_parts", cfg.split_val_parts);
  }
}

RunConfig load_run_config(const GlobalOpts& g) {
  RunConfig cfg;
  cfg.train.model = fdavae::desk_scale_config();
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path);
    if (!f) throw fdavae::ConfigError("cannot open config: " + g.config_path);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw fdavae::ConfigError("bad config JSON: " + std::string(e.what()));
    }
    apply_json(j, cfg);
  }
  if (g.seed_set) cfg.train.seed = g.seed;
  cfg.train.quiet = g.quiet;
  cfg.train.run_dir = g.run_dir;
  return cfg;
}

std::vector<fdavae::PhasePair> load_pairs(const std::string& manifest_path,
                                          const fdavae::PreprocessConfig& prep) {
  const auto rows = fdavae::read_manifest(manifest_path);
  const std::string root = fs::path(manifest_path).parent_path().string();
  return fdavae::load_pair_dataset(root.empty() ? "." : root, rows, prep);
}

// Builds the model from a checkpoint (parameters only) and reports its meta.
std::unique_ptr<fdavae::VaeModel> model_from_checkpoint(
    const std::string& path, fdavae::CheckpointMeta& meta) {
  if (!fs::exists(path))
    throw fdavae::CheckpointError("checkpoint not found: " + path);
  meta = fdavae::read_checkpoint_meta(path);
  auto model = std::make_unique<fdavae::VaeModel>(meta.model, 0);
  fdavae::load_checkpoint(path, *model, nullptr, nullptr);
  return model;
}

int map_exception(const GlobalOpts& g) {
  try {
    throw;
  } catch (const fdavae::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const fdavae::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fdavae::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fdavae::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fdavae::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  (void)g;
}

// ---------------------------------------------------------------------------

int cmd_generate_data(const GlobalOpts& g, const std::string& out_dir, int n,
                      int size, double noise, double gain_lo, double gain_hi) {
  fdavae::PhantomSpec spec;
  spec.canvas_size = size;
  spec.noise_sigma = noise;
  spec.gain_lo = gain_lo;
  spec.gain_hi = gain_hi;
  spec.seed = g.seed;
  spec.validate();
  if (n < 0) throw fdavae::ConfigError("generate-data: --n must be >= 0");
  const auto rows = fdavae::write_phantom_dataset(spec, n, out_dir);
  if (!g.quiet)
    std::cerr << "wrote " << rows.size() << " pairs to " << out_dir << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, RunConfig cfg) {
  if (cfg.manifest.empty())
    throw fdavae::ConfigError("train: no dataset manifest configured");
  if (cfg.prep.target_h == 0) {
    cfg.prep.target_h = cfg.train.model.input_h;
    cfg.prep.target_w = cfg.train.model.input_w;
  }
  auto pairs = load_pairs(cfg.manifest, cfg.prep);
  auto split = fdavae::split_by_group(pairs, cfg.split_train_parts,
                                      cfg.split_val_parts, cfg.train.seed);
  if (!g.quiet)
    for (const auto& warning : split.warnings)
      std::cerr << "warning: " << warning << "\n";

  fdavae::Trainer trainer(cfg.train);
  trainer.train(split.train, split.validation);
  return 0;
}

int cmd_synthesize(const GlobalOpts& g, const std::string& ckpt,
                   const std::string& manifest, const std::string& out_dir,
                   const std::string& direction, const std::string& mode,
                   fdavae::PreprocessConfig prep) {
  fdavae::CheckpointMeta meta;
  auto model = model_from_checkpoint(ckpt, meta);
  if (prep.target_h == 0) {
    prep.target_h = meta.model.input_h;
    prep.target_w = meta.model.input_w;
  }
  const auto pairs = load_pairs(manifest, prep);
  const auto dir = fdavae::direction_from_string(direction);
  const bool use_flip = meta.ablation != fdavae::AblationMode::backbone_only;
  if (mode != "deterministic" && mode != "stochastic")
    throw fdavae::ConfigError("synthesize: bad --mode '" + mode + "'");
  const auto smode = mode == "deterministic" ? fdavae::SynthesisMode::deterministic
                                             : fdavae::SynthesisMode::stochastic;

  auto manifest_out = fdavae::synthesize_dataset(*model, pairs, dir, out_dir,
                                                 use_flip, smode, g.seed);
  if (!g.quiet)
    std::cerr << "synthesized " << manifest_out.rows.size() << " samples to "
              << out_dir << "\n";
  for (const auto& err : manifest_out.errors)
    std::cerr << "error: " << err << "\n";
  return manifest_out.errors.empty() ? 0 : 5;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& ckpt,
                 const std::string& manifest, const std::string& out_path,
                 std::vector<std::string> directions,
                 fdavae::PreprocessConfig prep) {
  fdavae::CheckpointMeta meta;
  auto model = model_from_checkpoint(ckpt, meta);
  if (prep.target_h == 0) {
    prep.target_h = meta.model.input_h;
    prep.target_w = meta.model.input_w;
  }
  const auto pairs = load_pairs(manifest, prep);
  const bool use_flip = meta.ablation != fdavae::AblationMode::backbone_only;
  if (directions.empty()) {
    directions.push_back("a2b");
    if (meta.ablation == fdavae::AblationMode::full)
      directions.push_back("b2a");
  }
  std::vector<fdavae::Direction> dirs;
  for (const auto& d : directions)
    dirs.push_back(fdavae::direction_from_string(d));

  fdavae::RandomFeatureDistance perce(meta.perce_seed);
  const auto cells = fdavae::evaluate(*model, pairs, dirs, perce, use_flip);
  fdavae::write_eval_report(cells, out_path);
  if (!g.quiet) {
    for (const auto& c : cells)
      std::cerr << to_string(c.direction) << " " << c.metric << " mean "
                << c.mean << " std " << c.std_dev << "\n";
  }
  return 0;
}

int cmd_diagnose(const GlobalOpts& g, const std::string& ckpt,
                 const std::string& manifest, const std::string& out_dir,
                 fdavae::PreprocessConfig prep) {
  fdavae::CheckpointMeta meta;
  auto model = model_from_checkpoint(ckpt, meta);
  if (prep.target_h == 0) {
    prep.target_h = meta.model.input_h;
    prep.target_w = meta.model.input_w;
  }
  const auto pairs = load_pairs(manifest, prep);
  if (pairs.empty()) throw fdavae::ConfigError("diagnose: empty dataset");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw fdavae::IoError("cannot create directory: " + out_dir);

  const auto report = fdavae::latent_symmetry_report(*model, pairs);
  {
    std::ofstream f((fs::path(out_dir) / "symmetry.csv").string());
    if (!f) throw fdavae::IoError("cannot write symmetry.csv");
    char line[256];
    std::snprintf(line, sizeof(line), "# mean_abs_mu_sum,%.9g,mean_abs_var_diff,%.9g\n",
                  report.mean_abs_mu_sum, report.mean_abs_var_diff);
    f << line << "sample_id,mu_term,var_term\n";
    for (const auto& row : report.rows) {
      std::snprintf(line, sizeof(line), "%s,%.9g,%.9g\n", row.sample_id.c_str(),
                    row.mu_term, row.var_term);
      f << line;
    }
  }

  // One latent-mean vector per phase per sample, projected to 2-D.
  std::vector<std::vector<float>> vectors;
  std::vector<std::pair<std::string, char>> labels;
  for (const auto& pair : pairs) {
    for (const auto& [img, phase] :
         {std::pair{&pair.phase_a, 'a'}, std::pair{&pair.phase_b, 'b'}}) {
      std::vector<const fdavae::Image*> one{img};
      const auto dist = model->encode(fdavae::images_to_tensor(one));
      vectors.emplace_back(dist.mean.data.begin(), dist.mean.data.end());
      labels.emplace_back(pair.sample_id, phase);
    }
  }
  const auto proj = fdavae::project_latents_2d(vectors);
  {
    std::ofstream f((fs::path(out_dir) / "projection.csv").string());
    if (!f) throw fdavae::IoError("cannot write projection.csv");
    char line[256];
    std::snprintf(line, sizeof(line), "# explained_variance,%.9g,%.9g\n",
                  proj.explained_variance[0], proj.explained_variance[1]);
    f << line << "sample_id,phase,pc1,pc2\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s,%c,%.9g,%.9g\n",
                    labels[i].first.c_str(), labels[i].second,
                    proj.coords[i][0], proj.coords[i][1]);
      f << line;
    }
  }
  if (!g.quiet)
    std::cerr << "mean_abs_mu_sum " << report.mean_abs_mu_sum
              << " mean_abs_var_diff " << report.mean_abs_var_diff << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flip-aligned two-phase VAE synthesis toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--run-dir", g.run_dir, "Run output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Write a phantom pair dataset");
  std::string gen_out = "data";
  int gen_n = 100, gen_size = 64;
  double gen_noise = 0.01, gen_gain_lo = 1.6, gen_gain_hi = 2.4;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--n", gen_n, "Number of pairs");
  gen->add_option("--size", gen_size, "Canvas size (pixels)");
  gen->add_option("--noise", gen_noise, "Additive noise sigma");
  gen->add_option("--gain-lo", gen_gain_lo, "Enhancement gain lower bound");
  gen->add_option("--gain-hi", gen_gain_hi, "Enhancement gain upper bound");

  // train
  auto* train = app.add_subcommand("train", "Train on a paired dataset");
  std::string train_manifest, train_ablation, train_resume;
  int train_epochs = -1, train_batch = -1;
  train->add_option("--manifest", train_manifest, "Dataset manifest (overrides config)");
  train->add_option("--ablation", train_ablation,
                    "Ablation mode: backbone, kl-fda, full");
  train->add_option("--epochs", train_epochs, "Override epoch count");
  train->add_option("--batch", train_batch, "Override batch size");
  train->add_option("--resume", train_resume, "Resume from checkpoint");

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "Cross-phase synthesis over a dataset");
  std::string sy_ckpt, sy_manifest, sy_out = "synth", sy_dir = "a2b",
              sy_mode = "deterministic";
  synth->add_option("--checkpoint", sy_ckpt, "Checkpoint file")->required();
  synth->add_option("--manifest", sy_manifest, "Dataset manifest")->required();
  synth->add_option("--out", sy_out, "Output directory");
  synth->add_option("--direction", sy_dir, "a2b or b2a");
  synth->add_option("--mode", sy_mode, "deterministic or stochastic");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Quality metrics over a dataset");
  std::string ev_ckpt, ev_manifest, ev_out = "report.csv";
  std::vector<std::string> ev_dirs;
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  eval->add_option("--out", ev_out, "Report CSV path");
  eval->add_option("--direction", ev_dirs, "Directions to evaluate (repeatable)");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Latent symmetry report + 2-D projection");
  std::string di_ckpt, di_manifest, di_out = "diagnostics";
  diag->add_option("--checkpoint", di_ckpt, "Checkpoint file")->required();
  diag->add_option("--manifest", di_manifest, "Dataset manifest")->required();
  diag->add_option("--out-dir", di_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed())
      return cmd_generate_data(g, gen_out, gen_n, gen_size, gen_noise,
                               gen_gain_lo, gen_gain_hi);

    RunConfig cfg = load_run_config(g);
    if (train->parsed()) {
      if (!train_manifest.empty()) cfg.manifest = train_manifest;
      if (!train_ablation.empty())
        cfg.train.ablation = fdavae::ablation_from_string(train_ablation);
      if (train_epochs > 0) cfg.train.epochs = train_epochs;
      if (train_batch > 0) cfg.train.batch_size = train_batch;
      cfg.train.resume_from = train_resume;
      return cmd_train(g, std::move(cfg));
    }
    if (synth->parsed())
      return cmd_synthesize(g, sy_ckpt, sy_manifest, sy_out, sy_dir, sy_mode,
                            cfg.prep);
    if (eval->parsed())
      return cmd_evaluate(g, ev_ckpt, ev_manifest, ev_out, ev_dirs, cfg.prep);
    if (diag->parsed())
      return cmd_diagnose(g, di_ckpt, di_manifest, di_out, cfg.prep);
  } catch (...) {
    return map_exception(g);
  }
  return 2;
}
