// Acceptance suite: one [PASS]/[FAIL] line per criterion, exit status 0 only
// when every criterion passes. Criteria that need double-precision arithmetic
// are delegated to the precision test executable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lowlight/enhance.hpp"
#include "lowlight/errors.hpp"
#include "lowlight/image_io.hpp"
#include "lowlight/scenes.hpp"
#include "lowlight/trainer.hpp"

using namespace lowlight;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<Scalar> random_values(std::size_t n, Rng& rng) {
  std::vector<Scalar> v(n);
  for (auto& x : v) x = static_cast<Scalar>(rng.normal());
  return v;
}

Tensor random_tensor(const Shape& shape, Rng& rng) { return Tensor::from_data(shape, random_values(numel(shape), rng)); }

double max_abs_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Runs a doctest executable with a test-case filter; returns exit status and
// the assertion summary line.
Outcome run_precision_suite(const std::string& filter, const fs::path& log, double budget_seconds) {
  const auto start = Clock::now();
  const std::string cmd = std::string("\"") + LOWLIGHT_PRECISION_TESTS + "\" --no-version --test-case=\"" + filter +
                          "\" > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  const double elapsed = seconds_since(start);
  std::ifstream in(log);
  std::string line, summary;
  while (std::getline(in, line))
    if (line.find("assertions:") != std::string::npos) {
      summary = line.substr(line.find("assertions:"));
      while (!summary.empty() && (summary.back() == '|' || summary.back() == ' ')) summary.pop_back();
    }
  Outcome o;
  o.pass = status == 0 && elapsed < budget_seconds && !summary.empty();
  o.detail = "double-precision suite, " + summary + ", " + fmt(elapsed, 3) + " s (budget " + fmt(budget_seconds) + " s)";
  if (!o.pass) o.detail += ", log " + log.string();
  return o;
}

// ---------------------------------------------------------------- C1 / C4

Outcome criterion_gradients(const fs::path& work) {
  return run_precision_suite("grad_check basics,gradients of*,stage-1 loss gradients*,denoiser gradients,image loss*",
                             work / "c1_gradcheck.log", 60.0);
}

Outcome criterion_diffusion_algebra(const fs::path& work) {
  Outcome roundtrip = run_precision_suite("forward/one-step round trip*", work / "c4_roundtrip.log", 10.0);

  const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  double ratio_err = 0;
  for (int t = 1; t <= s.T; ++t)
    ratio_err = std::max(ratio_err, std::abs(s.alpha_bar[t] / s.alpha_bar[t - 1] - s.alpha[t]));

  // CFG must be affine in omega: f(w) = f(0) + w (f(1) - f(0)).
  UNetConfig uc;
  uc.base_channels = 8;
  uc.channel_multipliers = {1, 2};
  uc.attention_levels = {0, 1};
  uc.regions = {{2, 2}, {2, 2}};
  uc.time_embed_dim = 16;
  LatentDenoiser model(uc, 11);
  Rng init(12);
  // Zero-initialized output layers would make both branches trivially equal.
  for (auto& p : model.parameters()) {
    const auto values = p.tensor.mutable_data();
    if (std::all_of(values.begin(), values.end(), [](Scalar v) { return v == 0; }))
      for (auto& v : values) v = static_cast<Scalar>(0.2 * init.normal());
  }
  const NoiseModel m = as_noise_model(model);
  double cfg_err = 0;
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    NoGradGuard no_grad;
    const Tensor z = random_tensor({1, 4, 8, 8}, rng);
    const ContextFeatures cond = model.context_features(random_tensor({1, 4, 8, 8}, rng));
    const ContextFeatures uncond = model.null_features(z.shape());
    const int t = static_cast<int>(rng.uniform_int(1, 1000));
    const Tensor f0 = cfg_predict(m, z, t, &cond, &uncond, {0.0});
    const Tensor f1 = cfg_predict(m, z, t, &cond, &uncond, {1.0});
    for (double w : {0.5, 2.0, 2.5, 7.5}) {
      const Tensor fw = cfg_predict(m, z, t, &cond, &uncond, {w});
      for (std::size_t i = 0; i < fw.size(); ++i) {
        const double expect = double(f0.data()[i]) + w * (double(f1.data()[i]) - double(f0.data()[i]));
        cfg_err = std::max(cfg_err, std::abs(double(fw.data()[i]) - expect));
      }
    }
  }
  Outcome o;
  o.pass = roundtrip.pass && ratio_err < 1e-9 && cfg_err < 1e-5;
  o.detail = "round trip: " + roundtrip.detail + "; max |abar_t/abar_{t-1} - alpha_t| " + fmt(ratio_err) +
             "; CFG affine error " + fmt(cfg_err);
  return o;
}

// ---------------------------------------------------------------- C2 / C3

int region_of(int token, int width, RegionSpec r) {
  const int y = token / width, x = token % width;
  return (y / r.height) * (width / r.width) + x / r.width;
}

// Direct global attention restricted to tokens of the same region (all
// tokens when `masked` is false), accumulated in double.
std::vector<double> attention_oracle(const Tensor& z, const Tensor& c, const AttentionWeights& w, int width,
                                     RegionSpec r, bool masked) {
  const int n = z.dim(0), d = z.dim(1), dk = w.head_features();
  auto project = [&](const Tensor& x, const Tensor& wm) {
    std::vector<double> out(std::size_t(n) * dk);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < dk; ++k) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += double(x.data()[i * d + j]) * double(wm.data()[k * d + j]);
        out[std::size_t(i) * dk + k] = s;
      }
    return out;
  };
  const auto q = project(z, w.w_q), k = project(c, w.w_k), v = project(c, w.w_v);
  std::vector<double> out(std::size_t(n) * dk, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> score(n, -INFINITY);
    double best = -INFINITY;
    for (int j = 0; j < n; ++j) {
      if (masked && region_of(i, width, r) != region_of(j, width, r)) continue;
      double s = 0;
      for (int a = 0; a < dk; ++a) s += q[std::size_t(i) * dk + a] * k[std::size_t(j) * dk + a];
      score[j] = s / std::sqrt(double(dk));
      best = std::max(best, score[j]);
    }
    double total = 0;
    for (int j = 0; j < n; ++j) total += std::isinf(score[j]) ? 0.0 : std::exp(score[j] - best);
    for (int j = 0; j < n; ++j) {
      if (std::isinf(score[j])) continue;
      const double p = std::exp(score[j] - best) / total;
      for (int a = 0; a < dk; ++a) out[std::size_t(i) * dk + a] += p * v[std::size_t(j) * dk + a];
    }
  }
  return out;
}

struct AttentionInstance {
  int height, width;
  RegionSpec region;
  Tensor z, c;
  AttentionWeights w;
};

AttentionInstance random_instance(Rng& rng) {
  AttentionInstance a;
  a.region = {int(rng.uniform_int(1, 3)), int(rng.uniform_int(1, 3))};
  a.height = a.region.height * int(rng.uniform_int(1, 4));
  a.width = a.region.width * int(rng.uniform_int(1, 4));
  const int d = int(rng.uniform_int(2, 8)), dk = int(rng.uniform_int(1, 6));
  a.z = random_tensor({a.height * a.width, d}, rng);
  a.c = random_tensor({a.height * a.width, d}, rng);
  a.w = AttentionWeights::create(d, dk, rng);
  return a;
}

Outcome criterion_locality() {
  Rng rng(21);
  double outside = 0, global_err = 0;
  int checked = 0, inside_changed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    AttentionInstance a = random_instance(rng);
    const Tensor base = region_cross_attention(a.z, a.c, a.height, a.width, a.region, a.w);
    const int regions = (a.height / a.region.height) * (a.width / a.region.width);
    const int j = int(rng.uniform_int(0, regions - 1));
    Tensor c2 = a.c.clone();
    const int d = a.c.dim(1), dk = a.w.head_features();
    for (int tok = 0; tok < a.height * a.width; ++tok)
      if (region_of(tok, a.width, a.region) == j)
        for (int e = 0; e < d; ++e) c2.mutable_data()[tok * d + e] += static_cast<Scalar>(rng.normal());
    const Tensor moved = region_cross_attention(a.z, c2, a.height, a.width, a.region, a.w);
    bool changed = false;
    for (int tok = 0; tok < a.height * a.width; ++tok)
      for (int e = 0; e < dk; ++e) {
        const double diff = std::abs(double(moved.data()[tok * dk + e]) - double(base.data()[tok * dk + e]));
        if (region_of(tok, a.width, a.region) == j) changed |= diff > 0;
        else outside = std::max(outside, diff);
      }
    inside_changed += changed;
    ++checked;

    // One region covering the grid is plain global attention.
    const RegionSpec whole{a.height, a.width};
    const Tensor k1 = region_cross_attention(a.z, a.c, a.height, a.width, whole, a.w);
    const auto oracle = attention_oracle(a.z, a.c, a.w, a.width, whole, false);
    for (std::size_t i = 0; i < oracle.size(); ++i) global_err = std::max(global_err, std::abs(double(k1.data()[i]) - oracle[i]));
    global_err = std::max(global_err, max_abs_diff(k1.data(), cross_attention(a.z, a.c, a.w).data()));
  }
  Outcome o;
  o.pass = outside == 0.0 && inside_changed == checked && global_err < 1e-6;
  o.detail = std::to_string(checked) + " random configs, max change outside the perturbed region " + fmt(outside) +
             ", perturbed region changed in " + std::to_string(inside_changed) + "/" + std::to_string(checked) +
             ", K=1 vs global oracle " + fmt(global_err);
  return o;
}

Outcome criterion_masked_oracle() {
  Rng rng(31);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    AttentionInstance a = random_instance(rng);
    const Tensor out = region_cross_attention(a.z, a.c, a.height, a.width, a.region, a.w);
    const auto oracle = attention_oracle(a.z, a.c, a.w, a.width, a.region, true);
    for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::abs(double(out.data()[i]) - oracle[i]));
  }
  return {worst < 1e-5, "20 random instances, max |region - masked global| " + fmt(worst)};
}

// ---------------------------------------------------------------- C6

Outcome criterion_isp() {
  Rng rng(61);
  int frames = 0;
  bool pack_ok = true;
  for (CfaPattern cfa : {CfaPattern::RGGB, CfaPattern::BGGR, CfaPattern::GRBG, CfaPattern::GBRG})
    for (int trial = 0; trial < 10; ++trial) {
      RawFrame f;
      f.cfa = cfa;
      f.width = 2 * int(rng.uniform_int(1, 32));
      f.height = 2 * int(rng.uniform_int(1, 32));
      f.mosaic.resize(std::size_t(f.width) * f.height);
      for (auto& v : f.mosaic) v = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
      pack_ok &= unpack_bayer(pack_bayer(f), cfa) == f.mosaic;
      ++frames;
    }
  double gamma_err = 0;
  for (int i = 0; i <= 1000000; ++i) {
    const double v = i / 1e6;
    gamma_err = std::max(gamma_err, std::abs(srgb_decode(srgb_encode(v)) - v));
  }
  // Constant RGGB frame, every stage evaluated by hand.
  RawFrame f;
  f.width = 4;
  f.height = 4;
  f.black_level = 512;
  f.white_level = 16383;
  f.wb_gains = {2.0, 1.0, 1.5};
  f.ccm = {0.9, 0.1, 0.0, 0.0, 0.8, 0.2, 0.1, 0.0, 0.9};
  f.exposure_ratio = 10;
  const std::uint16_t cell[4] = {612, 712, 812, 562};
  f.mosaic.resize(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) f.mosaic[y * 4 + x] = cell[(y % 2) * 2 + x % 2];
  const double range = 16383.0 - 512.0;
  const double lin[3] = {std::min(1.0, 10 * 100 / range * 2.0), (10 * 200 / range + 10 * 300 / range) / 2,
                         std::min(1.0, 10 * 50 / range * 1.5)};
  const double ref_lin[3] = {100 / range * 2.0, (200 / range + 300 / range) / 2, 50 / range * 1.5};
  const double ref[3] = {srgb_encode(0.9 * ref_lin[0] + 0.1 * ref_lin[1]), srgb_encode(0.8 * ref_lin[1] + 0.2 * ref_lin[2]),
                         srgb_encode(0.1 * ref_lin[0] + 0.9 * ref_lin[2])};
  const ImagePlane a = raw_to_lrgb(f), b = raw_to_srgb_reference(f);
  double composite_err = 0;
  for (int p = 0; p < 4; ++p)
    for (int c = 0; c < 3; ++c) {
      composite_err = std::max(composite_err, std::abs(a.data[3 * p + c] - lin[c]));
      composite_err = std::max(composite_err, std::abs(b.data[3 * p + c] - ref[c]));
    }
  Outcome o;
  o.pass = pack_ok && gamma_err < 1e-6 && composite_err < 1e-6;
  o.detail = "pack/unpack exact on " + std::to_string(frames) + " frames over 4 CFA patterns: " + (pack_ok ? "yes" : "no") +
             "; gamma round trip max error " + fmt(gamma_err) + "; composite pipeline max error " + fmt(composite_err);
  return o;
}

// ---------------------------------------------------------------- toy experiment

struct Experiment {
  fs::path work;
  TrainConfig stage1, stage2;
  std::vector<TrainingPair> train, test;
  std::vector<RawPair> test_raw;
  std::optional<Stage1Result> vae_skip;
  std::optional<Stage1Result> vae_plain;
  std::optional<Stage2Result> denoiser;
  Checkpoint vae_ckpt, unet_ckpt;
  std::optional<EnhanceModels> models;
  double stage1_seconds = 0, stage1_plain_seconds = 0, stage2_seconds = 0;
};

void log(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

void prepare_data(Experiment& e) {
  SensorNoiseParams noise;
  noise.seed = 1;
  e.train = training_pairs(make_dataset(make_scenes(200, 64, 64, 1), {100}, noise));
  noise.seed = 1000001;
  e.test_raw = make_dataset(make_scenes(20, 64, 64, 1000001), {100}, noise);
  e.test = training_pairs(e.test_raw);
  write_pairs(e.work / "test", e.test_raw, e.work / "test" / "manifest.json");
}

void train_models(Experiment& e) {
  auto start = Clock::now();
  e.vae_skip = train_stage1(e.stage1, e.train, log, true);
  e.stage1_seconds = seconds_since(start);
  e.vae_ckpt = make_vae_checkpoint(e.vae_skip->vae, &e.stage1);
  save_checkpoint(e.work / "vae.ckpt", e.vae_ckpt);

  start = Clock::now();
  e.denoiser = train_stage2(e.stage2, e.train, e.vae_skip->vae, log);
  e.stage2_seconds = seconds_since(start);
  e.unet_ckpt = make_denoiser_checkpoint(e.denoiser->model, e.denoiser->latent_scale, e.stage2.schedule,
                                         e.vae_ckpt.checksum, &e.stage2);
  save_checkpoint(e.work / "unet.ckpt", e.unet_ckpt);
  e.models.emplace(load_models(e.work / "vae.ckpt", e.work / "unet.ckpt"));
}

double reconstruction_mse(const Vae& vae, const std::vector<TrainingPair>& pairs, bool use_skips) {
  NoGradGuard no_grad;
  double total = 0;
  for (const auto& p : pairs) {
    VaeOutput enc = vae.encode(to_tensor(p.noisy_lrgb));
    const Tensor x = use_skips ? vae.decode(enc.mu, enc.skip_features) : vae.decode(enc.mu);
    total += mse(x, to_tensor(p.clean_srgb)).item();
  }
  return total / double(pairs.size());
}

Outcome criterion_residual_vae(Experiment& e) {
  // Zeroed residual convolutions make the skip path a no-op.
  Vae vae(e.stage1.vae, 5);
  for (auto& conv : vae.residual_convs()) {
    for (auto& v : conv.weight.mutable_data()) v = 0;
    for (auto& v : conv.bias.mutable_data()) v = 0;
  }
  Rng rng(51);
  bool identical = true;
  for (int trial = 0; trial < 5; ++trial) {
    NoGradGuard no_grad;
    std::vector<Scalar> img(3 * 64 * 64);
    for (auto& v : img) v = static_cast<Scalar>(rng.uniform());
    VaeOutput enc = vae.encode(Tensor::from_data({1, 3, 64, 64}, img));
    const Tensor with = vae.decode(enc.mu, enc.skip_features), without = vae.decode(enc.mu);
    identical &= std::memcmp(with.data().data(), without.data().data(), with.size() * sizeof(Scalar)) == 0;
  }

  const auto start = Clock::now();
  e.vae_plain = train_stage1(e.stage1, e.train, log, false);
  e.stage1_plain_seconds = seconds_since(start);
  const double with_skip = reconstruction_mse(e.vae_skip->vae, e.test, true);
  const double without_skip = reconstruction_mse(e.vae_plain->vae, e.test, false);
  Outcome o;
  o.pass = identical && with_skip < without_skip && e.stage1_seconds + e.stage1_plain_seconds < 600;
  o.detail = std::string("zero residual decode bitwise equal: ") + (identical ? "yes" : "no") +
             "; test MSE with skips " + fmt(with_skip) + " vs without " + fmt(without_skip) + " (equal budget of " +
             std::to_string(e.stage1.epochs) + " epochs, " + fmt(e.stage1_seconds + e.stage1_plain_seconds, 3) + " s)";
  return o;
}

Outcome criterion_dropout(Experiment& e) {
  const Stage2Result& r = *e.denoiser;
  const double rate = r.samples ? double(r.dropped) / double(r.samples) : 0.0;
  Outcome o;
  o.pass = r.samples >= 10000 && std::abs(rate - 0.05) <= 0.01;
  o.detail = "condition replaced in " + std::to_string(r.dropped) + " of " + std::to_string(r.samples) +
             " stage-2 samples = " + fmt(100 * rate, 3) + "%";
  return o;
}

Outcome criterion_end_to_end(Experiment& e) {
  EnhanceOptions opt;  // 50 DDIM steps, guidance 2.0
  opt.seed = 7;
  const EvalReport report = evaluate(*e.models, e.test, opt);
  std::ofstream(e.work / "report.json") << report.to_json().dump(2);

  // Seed-fixed inference is bit-reproducible, also through the written file.
  const ImagePlane a = enhance_raw(*e.models, e.test_raw[0].noisy, opt);
  const ImagePlane b = enhance_raw(*e.models, e.test_raw[0].noisy, opt);
  write_image(e.work / "repro_a.png", a);
  write_image(e.work / "repro_b.png", b);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool reproducible = a.data == b.data && bytes(e.work / "repro_a.png") == bytes(e.work / "repro_b.png");

  const double train_minutes = (e.stage1_seconds + e.stage2_seconds) / 60.0;
  const double dpsnr = report.mean_psnr - report.mean_input_psnr;
  const double dssim = report.mean_ssim - report.mean_input_ssim;
  Outcome o;
  o.pass = dpsnr >= 3.0 && dssim >= 0.05 && reproducible && train_minutes <= 30.0;
  o.detail = "test PSNR " + fmt(report.mean_psnr) + " dB vs input " + fmt(report.mean_input_psnr) + " (+" + fmt(dpsnr, 3) +
             "), SSIM " + fmt(report.mean_ssim) + " vs " + fmt(report.mean_input_ssim) + " (+" + fmt(dssim, 3) +
             "); bit-reproducible " + (reproducible ? "yes" : "no") + "; training " + fmt(train_minutes, 3) + " min";
  return o;
}

Outcome criterion_checkpoints(Experiment& e) {
  const auto start = Clock::now();
  bool exact = true;
  for (const char* name : {"vae.ckpt", "unet.ckpt"}) {
    const Checkpoint& original = std::string(name) == "vae.ckpt" ? e.vae_ckpt : e.unet_ckpt;
    const Checkpoint loaded = load_checkpoint(e.work / name);
    exact &= loaded.tensors.size() == original.tensors.size() && loaded.config == original.config;
    for (std::size_t i = 0; exact && i < original.tensors.size(); ++i)
      exact &= loaded.tensors[i].name == original.tensors[i].name && loaded.tensors[i].shape == original.tensors[i].shape &&
               std::memcmp(loaded.tensors[i].data.data(), original.tensors[i].data.data(),
                           original.tensors[i].data.size() * 4) == 0;
  }
  Checkpoint copy = e.vae_ckpt;
  const std::vector<std::uint8_t> good = serialize_checkpoint(copy);
  auto kind = [](std::vector<std::uint8_t> bytes) -> std::string {
    try {
      deserialize_checkpoint(bytes);
      return "accepted";
    } catch (const BadMagicError&) {
      return "bad-magic";
    } catch (const VersionMismatchError&) {
      return "version";
    } catch (const ChecksumError&) {
      return "checksum";
    } catch (const TruncatedFileError&) {
      return "truncated";
    } catch (const std::exception&) {
      return "other";
    }
  };
  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  auto version = good;
  version[8] = 2;
  auto magic = good;
  magic[3] = '?';
  auto truncated = good;
  truncated.resize(good.size() - 100);
  const std::string k_flip = kind(flipped), k_version = kind(version), k_magic = kind(magic), k_trunc = kind(truncated);
  const std::string k_good = kind(good);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = exact && k_good == "accepted" && k_flip == "checksum" && k_version == "version" && k_magic == "bad-magic" &&
           k_trunc == "truncated" && elapsed < 5.0;
  o.detail = std::string("trained checkpoints bit-exact: ") + (exact ? "yes" : "no") + "; flipped byte -> " + k_flip +
             ", version 2 -> " + k_version + ", bad magic -> " + k_magic + ", truncated -> " + k_trunc + " (" +
             fmt(elapsed, 3) + " s)";
  return o;
}

Outcome criterion_guidance(Experiment& e) {
  EnhanceOptions opt;
  opt.seed = 3;
  const bool default_is_two = opt.guidance == 2.0;
  std::vector<ImagePlane> outs;
  for (double w : {1.0, 2.0, 2.5}) {
    opt.guidance = w;
    outs.push_back(enhance_lrgb(*e.models, e.test[1].noisy_lrgb, opt));
  }
  const bool distinct = outs[0].data != outs[1].data && outs[1].data != outs[2].data && outs[0].data != outs[2].data;

  // The CLI accepts the default guidance and matches the library output.
  const fs::path raw = e.work / "test" / "pair0001_noisy.pgm", out = e.work / "cli_guidance.png";
  const std::string cmd = std::string("\"") + LOWLIGHT_CLI + "\" enhance \"" + raw.string() + "\" --vae \"" +
                          (e.work / "vae.ckpt").string() + "\" --unet \"" + (e.work / "unet.ckpt").string() +
                          "\" --guidance 2.0 --steps 50 --seed 3 --out \"" + out.string() + "\"";
  const int status = std::system(cmd.c_str());
  bool cli_match = false;
  if (status == 0 && fs::exists(out)) {
    EnhanceOptions lib;
    lib.seed = 3;
    write_image(e.work / "lib_guidance.png", enhance_raw(*e.models, read_raw(raw), lib));
    cli_match = read_image(e.work / "lib_guidance.png").data == read_image(out).data;
  }
  double d12 = 0, d225 = 0;
  for (std::size_t i = 0; i < outs[0].data.size(); ++i) {
    d12 = std::max(d12, double(std::abs(outs[0].data[i] - outs[1].data[i])));
    d225 = std::max(d225, double(std::abs(outs[1].data[i] - outs[2].data[i])));
  }
  Outcome o;
  o.pass = default_is_two && distinct && status == 0 && cli_match;
  o.detail = "outputs for omega 1.0/2.0/2.5 distinct: " + std::string(distinct ? "yes" : "no") + " (max diff 1 vs 2 " +
             fmt(d12) + ", 2 vs 2.5 " + fmt(d225) + "); default omega 2.0: " + (default_is_two ? "yes" : "no") +
             "; CLI --guidance 2.0 exit " + std::to_string(status) + ", matches library: " + (cli_match ? "yes" : "no");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path(LOWLIGHT_ACCEPTANCE_WORK_DIR);
  fs::create_directories(work);

  struct Row {
    std::string id, title;
    Outcome outcome;
    double seconds;
  };
  std::vector<Row> rows;
  auto run = [&](const std::string& id, const std::string& title, const std::function<Outcome()>& fn) {
    std::cerr << "running " << id << ": " << title << std::endl;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double s = seconds_since(start);
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << title << " | " << o.detail << " | " << fmt(s, 3) << " s"
              << std::endl;
    rows.push_back({id, title, o, s});
  };

  Experiment e;
  e.work = work;
  e.stage1 = load_train_config(fs::path(LOWLIGHT_SOURCE_DIR) / "configs" / "toy_stage1.json");
  e.stage2 = load_train_config(fs::path(LOWLIGHT_SOURCE_DIR) / "configs" / "toy_stage2.json");
  bool trained = false;
  auto with_models = [&](const std::function<Outcome()>& fn) {
    return [&, fn]() -> Outcome {
      if (!trained) {
        prepare_data(e);
        train_models(e);
        trained = true;
      }
      return fn();
    };
  };

  run("C1", "autodiff finite-difference gradient checks", [&] { return criterion_gradients(work); });
  run("C2", "region-attention locality and K=1 equivalence", criterion_locality);
  run("C3", "region attention equals block-diagonal masked attention", criterion_masked_oracle);
  run("C4", "diffusion algebra", [&] { return criterion_diffusion_algebra(work); });
  run("C5", "residual VAE zero identity and skip benefit", with_models([&] { return criterion_residual_vae(e); }));
  run("C6", "ISP bit-exactness", criterion_isp);
  run("C7", "condition dropout rate", with_models([&] { return criterion_dropout(e); }));
  run("C8", "end-to-end toy experiment", with_models([&] { return criterion_end_to_end(e); }));
  run("C9", "checkpoint round trip and corruption errors", with_models([&] { return criterion_checkpoints(e); }));
  run("C10", "guidance behaviour and CLI default", with_models([&] { return criterion_guidance(e); }));

  int passed = 0;
  for (const auto& r : rows) passed += r.outcome.pass;
  std::cout << passed << "/" << rows.size() << " acceptance criteria passed" << std::endl;
  return passed == static_cast<int>(rows.size()) ? 0 : 1;
}
