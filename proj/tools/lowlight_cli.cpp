// SPDX-License-Identifier: Apache-2.0
// Command-line front end: ISP rendering, data synthesis, both training
// stages, enhancement, evaluation and schedule export.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowlight/enhance.hpp"
#include "lowlight/errors.hpp"
#include "lowlight/image_io.hpp"
#include "lowlight/scenes.hpp"
#include "lowlight/trainer.hpp"

namespace fs = std::filesystem;
using namespace lowlight;

namespace {

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ImagePlane> load_image_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .png or .ppm images in " + dir.string());
  std::vector<ImagePlane> images;
  for (const auto& f : files) images.push_back(read_image(f));
  return images;
}

void run_isp(const std::string& raw, const std::string& out, bool reference) {
  RawFrame frame = read_raw(raw);
  write_image(out, reference ? raw_to_srgb_reference(frame) : lrgb_to_srgb(raw_to_lrgb(frame), frame.ccm));
}

struct SynthArgs {
  std::string images;
  std::vector<double> ratios{100.0};
  std::uint64_t seed = 0;
  std::string out;
  int count = 200;
  int size = 64;
  double system_gain = 2.0;
  double read_sigma = 4.0;
};

void run_synth(const SynthArgs& a) {
  std::vector<ImagePlane> images;
  if (a.images.empty()) {
    // Scenes are generated at packed resolution, so mosaics are twice as large.
    images = make_scenes(a.count, a.size, a.size, a.seed);
  } else {
    images = load_image_dir(a.images);
  }
  SensorNoiseParams params;
  params.system_gain = a.system_gain;
  params.read_sigma = a.read_sigma;
  params.seed = a.seed;
  const auto pairs = make_dataset(images, a.ratios, params);
  const fs::path out(a.out);
  write_pairs(out, pairs, out / "manifest.json");
  log_line("wrote " + std::to_string(pairs.size()) + " pairs and " + (out / "manifest.json").string());
}

void run_train_vae(const std::string& config_path) {
  TrainConfig config = load_train_config(config_path);
  if (config.stage != 1) throw ConfigError("train-vae expects a stage 1 config");
  if (config.checkpoint_out.empty()) throw ConfigError("train config has no checkpoint_out");
  const auto data = load_training_pairs(config.dataset);
  log_line("training VAE on " + std::to_string(data.size()) + " pairs");
  Stage1Result result = train_stage1(config, data, log_line);
  Checkpoint ckpt = make_vae_checkpoint(result.vae, &config);
  save_checkpoint(config.checkpoint_out, ckpt);
  if (!config.log_path.empty()) write_loss_log(config.log_path, result.log, 1);
  log_line("saved " + config.checkpoint_out);
}

void run_train_diffusion(const std::string& config_path, std::string vae_path) {
  TrainConfig config = load_train_config(config_path);
  if (config.stage != 2) throw ConfigError("train-diffusion expects a stage 2 config");
  if (config.checkpoint_out.empty()) throw ConfigError("train config has no checkpoint_out");
  if (vae_path.empty()) vae_path = config.vae_checkpoint;
  if (vae_path.empty()) throw ConfigError("no VAE checkpoint given (--vae or vae_checkpoint)");
  const Checkpoint vae_ckpt = load_checkpoint(vae_path);
  const Vae vae = vae_from_checkpoint(vae_ckpt);
  config.vae = vae.config();
  config.validate();
  const auto data = load_training_pairs(config.dataset);
  log_line("training denoiser on " + std::to_string(data.size()) + " pairs");
  Stage2Result result = train_stage2(config, data, vae, log_line);
  Checkpoint ckpt = make_denoiser_checkpoint(result.model, result.latent_scale, config.schedule, vae_ckpt.checksum, &config);
  ckpt.config["condition_dropout"] = {{"samples", result.samples}, {"dropped", result.dropped}};
  save_checkpoint(config.checkpoint_out, ckpt);
  if (!config.log_path.empty()) write_loss_log(config.log_path, result.log, 2);
  log_line("saved " + config.checkpoint_out + " (condition dropped in " + std::to_string(result.dropped) + " of " +
           std::to_string(result.samples) + " samples)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-light raw image enhancement with a latent diffusion model"};
  app.require_subcommand(1);

  std::string raw, out;
  bool reference = false;
  auto* isp = app.add_subcommand("isp", "Render a raw frame to an image through the fixed ISP");
  isp->add_option("raw", raw, "Raw mosaic (.pgm with .meta.json sidecar)")->required();
  isp->add_option("--out", out, "Output .png or .ppm")->required();
  isp->add_flag("--srgb-reference", reference, "Reference rendering without amplification");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Synthesize noisy/clean raw pairs and a manifest");
  synth->add_option("--images", synth_args.images, "Directory of clean .png/.ppm images (default: procedural scenes)");
  synth->add_option("--ratios", synth_args.ratios, "Exposure ratios")->delimiter(',');
  synth->add_option("--seed", synth_args.seed, "Base seed");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--count", synth_args.count, "Number of procedural scenes")->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_args.size, "Procedural scene size in linear-RGB pixels")->check(CLI::PositiveNumber);
  synth->add_option("--system-gain", synth_args.system_gain, "Digital numbers per photoelectron");
  synth->add_option("--read-sigma", synth_args.read_sigma, "Read noise standard deviation in DN");

  std::string config_path, vae_path, unet_path;
  auto* train_vae = app.add_subcommand("train-vae", "Stage 1: train the residual VAE");
  train_vae->add_option("--config", config_path, "Training config JSON")->required();

  auto* train_diff = app.add_subcommand("train-diffusion", "Stage 2: train the denoiser on a frozen VAE");
  train_diff->add_option("--config", config_path, "Training config JSON")->required();
  train_diff->add_option("--vae", vae_path, "Stage 1 checkpoint (overrides vae_checkpoint)");

  EnhanceOptions opts;
  auto* enhance = app.add_subcommand("enhance", "Enhance one raw frame");
  enhance->add_option("raw", raw, "Raw mosaic (.pgm with .meta.json sidecar)")->required();
  enhance->add_option("--vae", vae_path, "VAE checkpoint")->required();
  enhance->add_option("--unet", unet_path, "Denoiser checkpoint")->required();
  enhance->add_option("--guidance", opts.guidance, "Classifier-free guidance weight")->capture_default_str();
  enhance->add_option("--steps", opts.steps, "DDIM steps")->capture_default_str();
  enhance->add_option("--seed", opts.seed, "Sampling seed")->capture_default_str();
  enhance->add_option("--out", out, "Output .png or .ppm")->required();

  std::string pairs_path, images_out;
  auto* eval = app.add_subcommand("eval", "Enhance every pair of a manifest and report PSNR/SSIM");
  eval->add_option("--pairs", pairs_path, "Manifest JSON of noisy/clean raw pairs")->required();
  eval->add_option("--vae", vae_path, "VAE checkpoint")->required();
  eval->add_option("--unet", unet_path, "Denoiser checkpoint")->required();
  eval->add_option("--guidance", opts.guidance, "Classifier-free guidance weight")->capture_default_str();
  eval->add_option("--steps", opts.steps, "DDIM steps")->capture_default_str();
  eval->add_option("--seed", opts.seed, "Sampling seed")->capture_default_str();
  eval->add_option("--out", out, "Report JSON")->required();
  eval->add_option("--images-out", images_out, "Also write enhanced images to this directory");

  int T = 1000;
  double beta_start = 1e-4, beta_end = 0.02;
  auto* sched = app.add_subcommand("schedule-dump", "Write the linear noise schedule as CSV");
  sched->add_option("--T", T, "Number of diffusion steps")->capture_default_str();
  sched->add_option("--beta-start", beta_start)->capture_default_str();
  sched->add_option("--beta-end", beta_end)->capture_default_str();
  sched->add_option("--out", out, "Output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*isp) {
      run_isp(raw, out, reference);
    } else if (*synth) {
      run_synth(synth_args);
    } else if (*train_vae) {
      run_train_vae(config_path);
    } else if (*train_diff) {
      run_train_diffusion(config_path, vae_path);
    } else if (*enhance) {
      const EnhanceModels models = load_models(vae_path, unet_path);
      enhance_image(raw, models, opts, out);
    } else if (*eval) {
      const EnhanceModels models = load_models(vae_path, unet_path);
      const auto entries = read_manifest(pairs_path);
      std::vector<TrainingPair> pairs;
      for (const auto& e : entries)
        pairs.push_back(make_training_pair(read_raw(e.noisy), read_raw(e.clean), e.noisy.stem().string()));
      std::vector<ImagePlane> outputs;
      const EvalReport report = evaluate(models, pairs, opts, images_out.empty() ? nullptr : &outputs);
      write_json(out, report.to_json());
      if (!images_out.empty()) {
        fs::create_directories(images_out);
        for (std::size_t i = 0; i < outputs.size(); ++i)
          write_image(fs::path(images_out) / (pairs[i].name + ".png"), outputs[i]);
      }
      std::cout << "mean PSNR " << report.mean_psnr << " dB (input " << report.mean_input_psnr << "), mean SSIM "
                << report.mean_ssim << " (input " << report.mean_input_ssim << ")\n";
    } else if (*sched) {
      const NoiseSchedule s = make_linear_schedule(T, beta_start, beta_end);
      if (out.empty()) {
        s.write_csv(std::cout);
      } else {
        std::ofstream f(out);
        if (!f) throw IoError("cannot write " + out);
        s.write_csv(f);
      }
    }
  } catch (const MissingMetadataError& e) {
    std::cerr << "error: missing metadata: " << e.what() << '\n';
    return 3;
  } catch (const IncompatibleCheckpointError& e) {
    std::cerr << "error: incompatible checkpoints: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
