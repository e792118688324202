#pragma once

// Command-line front end. Everything lives in a header so tests can drive
// `run_cli` in-process; tools/p2n.cpp is a thin main().

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "p2n/p2n.hpp"

namespace p2n::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kCollapse = 3 };

/// Everything a command may need. Built from an optional JSON document,
/// then overridden by flags.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;

  std::optional<fs::path> corpus;
  std::optional<fs::path> input;
  std::optional<fs::path> clean;
  std::optional<fs::path> checkpoint;
  fs::path output;

  PretrainConfig pretrain;
  ArchitectureConfig arch;
  TrainConfig train;
  int bit_depth = 8;

  AblationAxis axis = AblationAxis::sigma;
  std::vector<std::string> values;

  // synth
  int count = 5;
  int size = 128;
  int channels = 1;
  NoiseSpec noise = NoiseSpec::gaussian(25.0 / 255.0);
};

namespace detail {

template <class T>
void take(const json& section, const std::string& prefix, const char* key, T& dst) {
  if (!section.contains(key)) return;
  try {
    dst = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix + "." + key, "wrong type");
  }
}

inline void reject_unknown(const json& section, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!section.is_object()) throw ConfigError(prefix, "must be an object");
  for (const auto& [k, v] : section.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(prefix.empty() ? k : prefix + "." + k, "unknown key");
  }
}

inline void take_path(const json& s, const char* key, std::optional<fs::path>& dst, const fs::path& base) {
  if (!s.contains(key)) return;
  if (!s.at(key).is_string()) throw ConfigError(std::string("paths.") + key, "must be a string");
  fs::path p = s.at(key).get<std::string>();
  dst = p.is_relative() ? base / p : p;
}

}  // namespace detail

/// Applies a JSON config document. Relative paths resolve against `base`
/// (the config file's directory).
inline void apply_json(RunConfig& cfg, const json& j, const fs::path& base) {
  using detail::take;
  detail::reject_unknown(j, "", {"seed", "jobs", "paths", "pretrain", "model", "train", "ablation", "output", "synth"});
  take(j, "", "seed", cfg.seed);
  take(j, "", "jobs", cfg.jobs);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    detail::reject_unknown(p, "paths", {"corpus", "input", "clean", "checkpoint", "output"});
    detail::take_path(p, "corpus", cfg.corpus, base);
    detail::take_path(p, "input", cfg.input, base);
    detail::take_path(p, "clean", cfg.clean, base);
    detail::take_path(p, "checkpoint", cfg.checkpoint, base);
    std::optional<fs::path> out;
    detail::take_path(p, "output", out, base);
    if (out) cfg.output = *out;
  }
  if (j.contains("pretrain")) {
    const auto& s = j.at("pretrain");
    detail::reject_unknown(s, "pretrain",
                           {"iterations", "learning_rate", "batch_size", "crop_size", "sigma_lo", "sigma_hi"});
    take(s, "pretrain", "iterations", cfg.pretrain.iterations);
    take(s, "pretrain", "learning_rate", cfg.pretrain.learning_rate);
    take(s, "pretrain", "batch_size", cfg.pretrain.batch_size);
    take(s, "pretrain", "crop_size", cfg.pretrain.crop_size);
    take(s, "pretrain", "sigma_lo", cfg.pretrain.sigma_lo);
    take(s, "pretrain", "sigma_hi", cfg.pretrain.sigma_hi);
  }
  if (j.contains("model")) {
    const auto& s = j.at("model");
    detail::reject_unknown(s, "model", {"base_width", "depth"});
    take(s, "model", "base_width", cfg.arch.base_width);
    take(s, "model", "depth", cfg.arch.depth);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    detail::reject_unknown(s, "train",
                           {"sigma", "learning_rate", "iterations", "gamma_start", "gamma_end", "epsilon", "norm",
                            "pairs_per_iteration", "weight_decay", "variant"});
    take(s, "train", "sigma", cfg.train.sigma);
    take(s, "train", "learning_rate", cfg.train.learning_rate);
    take(s, "train", "iterations", cfg.train.iterations);
    take(s, "train", "gamma_start", cfg.train.gamma_start);
    take(s, "train", "gamma_end", cfg.train.gamma_end);
    take(s, "train", "epsilon", cfg.train.epsilon);
    take(s, "train", "pairs_per_iteration", cfg.train.pairs_per_iteration);
    take(s, "train", "weight_decay", cfg.train.weight_decay);
    if (s.contains("norm")) cfg.train.norm_mode = parse_norm_mode(s.at("norm").get<std::string>());
    if (s.contains("variant")) cfg.train.variant = parse_variant(s.at("variant").get<std::string>());
  }
  if (j.contains("ablation")) {
    const auto& s = j.at("ablation");
    detail::reject_unknown(s, "ablation", {"axis", "values"});
    if (s.contains("axis")) cfg.axis = parse_axis(s.at("axis").get<std::string>());
    if (s.contains("values")) {
      cfg.values.clear();
      for (const auto& v : s.at("values")) cfg.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  if (j.contains("output")) {
    const auto& s = j.at("output");
    detail::reject_unknown(s, "output", {"bit_depth"});
    take(s, "output", "bit_depth", cfg.bit_depth);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    detail::reject_unknown(s, "synth", {"count", "size", "channels", "noise", "sigma", "pg_a", "pg_b"});
    take(s, "synth", "count", cfg.count);
    take(s, "synth", "size", cfg.size);
    take(s, "synth", "channels", cfg.channels);
    std::string kind = cfg.noise.kind == NoiseKind::gaussian ? "gaussian" : "poisson-gaussian";
    take(s, "synth", "noise", kind);
    if (kind == "gaussian") cfg.noise.kind = NoiseKind::gaussian;
    else if (kind == "poisson-gaussian") cfg.noise.kind = NoiseKind::poisson_gaussian;
    else throw ConfigError("synth.noise", "expected gaussian or poisson-gaussian");
    take(s, "synth", "sigma", cfg.noise.gaussian_sigma);
    take(s, "synth", "pg_a", cfg.noise.pg_a);
    take(s, "synth", "pg_b", cfg.noise.pg_b);
  }
}

inline json read_json(const fs::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(field, std::string("invalid JSON: ") + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void require_path(const std::optional<fs::path>& p, const std::string& field) {
  if (!p) throw ConfigError(field, "required");
  if (!fs::exists(*p)) throw ConfigError(field, "does not exist: " + p->string());
}

inline void prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec || !fs::is_directory(cfg.output))
    throw ConfigError("paths.output", "cannot create directory " + cfg.output.string());
}

/// A dataset given as a manifest file, a noisy/ + gt/ directory, or one image.
inline DatasetManifest resolve_inputs(const RunConfig& cfg, std::ostream& err) {
  require_path(cfg.input, "paths.input");
  const fs::path& in = *cfg.input;
  if (fs::is_directory(in)) return scan_dataset(in, err);
  if (in.extension() == ".json") {
    const auto m = manifest_from_json(read_json(in, "paths.input"), in.parent_path());
    return m;
  }
  if (!is_image_file(in)) throw ConfigError("paths.input", "not an image, manifest or dataset directory");
  DatasetManifest m;
  m.root = in.parent_path();
  ManifestEntry e{in.stem().string(), in, std::nullopt};
  if (cfg.clean) {
    require_path(cfg.clean, "paths.clean");
    e.clean = *cfg.clean;
  }
  m.entries.push_back(std::move(e));
  return m;
}

inline std::vector<Image> load_corpus(const fs::path& dir) {
  fs::path src = dir;
  if (fs::is_directory(dir / "gt")) src = dir / "gt";
  std::vector<Image> corpus;
  if (fs::is_directory(src)) {
    for (const auto& p : list_images(src)) corpus.push_back(load_image(p));
  } else {
    corpus.push_back(load_image(src));
  }
  if (corpus.empty()) throw ConfigError("paths.corpus", "no images found in " + dir.string());
  for (const auto& im : corpus)
    if (im.channels() != corpus.front().channels())
      throw ConfigError("paths.corpus", "images mix gray and colour");
  return corpus;
}

inline DenoiserModel load_model(const RunConfig& cfg) {
  require_path(cfg.checkpoint, "paths.checkpoint");
  return load_checkpoint(*cfg.checkpoint);
}

// ---- commands ---------------------------------------------------------------

inline int cmd_pretrain(RunConfig cfg, std::ostream& out, std::ostream&) {
  require_path(cfg.corpus, "paths.corpus");
  cfg.pretrain.seed = cfg.seed;
  cfg.pretrain.validate();
  const auto corpus = load_corpus(*cfg.corpus);
  prepare_output(cfg);
  cfg.arch.channels = corpus.front().channels();
  if (cfg.arch.base_width < 1) throw ConfigError("model.base_width", "must be >= 1");
  if (cfg.arch.depth < 1) throw ConfigError("model.depth", "must be >= 1");
  auto result = pretrain_gaussian(make_denoiser(cfg.arch, cfg.seed), cfg.pretrain, corpus);
  const fs::path ckpt = cfg.checkpoint.value_or(cfg.output / "model.ckpt");
  save_checkpoint(result.model, ckpt);
  std::ostringstream log;
  log << "iteration,loss\n" << std::setprecision(10);
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) log << i << "," << result.loss_history[i] << "\n";
  write_text(cfg.output / "pretrain_loss.csv", log.str());
  out << "wrote " << ckpt.string() << " (" << result.model.parameter_count() << " parameters)\n";
  return kOk;
}

inline int cmd_denoise(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto model = load_model(cfg);
  cfg.train.validate();
  auto manifest = resolve_inputs(cfg, err);
  if (manifest.entries.empty()) throw ConfigError("paths.input", "no images to denoise");
  if (cfg.bit_depth != 8 && cfg.bit_depth != 16) throw ConfigError("output.bit_depth", "must be 8 or 16");
  prepare_output(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  const auto& entries = manifest.entries;
  std::vector<json> reports(entries.size());
  std::vector<bool> collapsed(entries.size(), false);
  parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    const auto& e = entries[i];
    const Image y = load_image(e.noisy);
    std::optional<Image> clean;
    if (e.clean) clean = load_image(*e.clean);
    DenoiserModel local = model;
    const auto report = train_single_image(local, y, tc, clean, e.id);
    save_image(report.final_denoised, cfg.output / (e.id + ".png"), cfg.bit_depth);
    json j = to_json(report);
    j["image_id"] = e.id;
    if (clean) {
      j["psnr_noisy"] = psnr(y, *clean);
      j["psnr_denoised"] = psnr(report.final_denoised, *clean);
      j["ssim_denoised"] = ssim(report.final_denoised, *clean);
    }
    write_text(cfg.output / (e.id + ".report.json"), j.dump(2) + "\n");
    write_text(cfg.output / (e.id + ".timing.json"), json{{"wall_time_s", report.wall_time}}.dump() + "\n");
    collapsed[i] = report.collapse_flag;
    reports[i] = std::move(j);
  });

  int status = kOk;
  double gain = 0.0;
  int scored = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (collapsed[i]) {
      err << "warning: " << entries[i].id << ": " << reports[i].at("warning").get<std::string>() << "\n";
      status = kCollapse;
    }
    if (reports[i].contains("psnr_denoised")) {
      gain += reports[i]["psnr_denoised"].get<double>() - reports[i]["psnr_noisy"].get<double>();
      ++scored;
    }
  }
  out << "denoised " << entries.size() << " image(s) into " << cfg.output.string() << "\n";
  if (scored) out << "mean PSNR gain " << gain / scored << " dB over " << scored << " referenced image(s)\n";
  return status;
}

inline int cmd_analyze_noise(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto manifest = resolve_inputs(cfg, err);
  if (manifest.entries.empty()) throw ConfigError("paths.input", "no images to analyse");
  std::vector<std::pair<Image, Image>> pairs;
  for (const auto& e : manifest.entries) {
    if (!e.clean) throw MissingReferenceError("entry '" + e.id + "' has no clean reference");
    pairs.emplace_back(load_image(e.noisy), load_image(*e.clean));
    if (pairs.back().first.shape() != pairs.back().second.shape())
      throw ShapeError("noisy/clean pair '" + e.id + "' differ in shape");
  }
  prepare_output(cfg);
  const auto stats = residual_stats(pairs);
  write_text(cfg.output / "noise_stats.json", to_json_text(stats) + "\n");
  write_text(cfg.output / "histogram.csv", histogram_csv(stats));
  out << "mean " << stats.mean << "  std " << stats.stddev << "  skewness " << stats.skewness << "  samples "
      << stats.sample_count << "\n";
  return kOk;
}

inline std::vector<EvalSample> paired_samples(const RunConfig& cfg, std::ostream& err) {
  const auto manifest = resolve_inputs(cfg, err);
  for (const auto& e : manifest.entries)
    if (!e.clean) throw MissingReferenceError("entry '" + e.id + "' has no clean reference");
  if (manifest.entries.empty()) throw ConfigError("paths.input", "dataset is empty");
  return load_samples(manifest);
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto model = load_model(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.validate();
  const auto samples = paired_samples(cfg, err);
  prepare_output(cfg);
  const auto run = evaluate(samples, model, tc, cfg.jobs);
  json j{{"mean_psnr", run.mean_psnr}, {"mean_ssim", run.mean_ssim}};
  double noisy = 0.0;
  json per = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    noisy += run.noisy[i].psnr / static_cast<double>(samples.size());
    json row = to_json(run.denoised[i]);
    row["psnr_noisy"] = run.noisy[i].psnr;
    row["ssim_noisy"] = run.noisy[i].ssim;
    const auto c = convergence_report(run.reports[i]);
    row["plateau_iteration"] = c.plateau_iteration;
    row["post_plateau_psnr_range"] = c.post_plateau_range;
    row["collapse"] = to_string(run.reports[i].collapse);
    per.push_back(std::move(row));
  }
  j["mean_psnr_noisy"] = noisy;
  j["per_image"] = per;
  write_text(cfg.output / "metrics.json", j.dump(2) + "\n");
  write_text(cfg.output / "metrics.csv", to_csv(run.denoised));
  out << "mean PSNR " << run.mean_psnr << " dB (noisy " << noisy << " dB), mean SSIM " << run.mean_ssim << "\n";
  return kOk;
}

inline int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.values.empty()) throw ConfigError("ablation.values", "value grid is empty");
  auto model = load_model(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.validate();
  const auto samples = paired_samples(cfg, err);
  prepare_output(cfg);
  const auto grid = run_ablation({cfg.axis, cfg.values}, samples, model, tc, cfg.jobs);
  write_text(cfg.output / "ablation.json", to_json(grid).dump(2) + "\n");
  write_text(cfg.output / "ablation.csv", to_csv(grid));
  out << to_csv(grid);
  return kOk;
}

/// Writes a synthetic paired corpus: gt/ (clean) and noisy/, 16-bit PNG.
inline int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.count < 1) throw ConfigError("synth.count", "must be >= 1");
  if (cfg.size < 1) throw ConfigError("synth.size", "must be >= 1");
  if (cfg.channels != 1 && cfg.channels != 3) throw ConfigError("synth.channels", "must be 1 or 3");
  try {
    cfg.noise.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("synth.noise", e.what());
  }
  prepare_output(cfg);
  fs::create_directories(cfg.output / "gt");
  fs::create_directories(cfg.output / "noisy");
  for (int i = 0; i < cfg.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img%03d", i);
    const Image clean = synthetic_scene(cfg.size, cfg.size, cfg.channels, RngStream(cfg.seed, std::string("scene/") + id));
    RngStream rng(cfg.seed, std::string("noise/") + id);
    const Image noisy = add_noise(clean, cfg.noise, rng);
    save_image(clean, cfg.output / "gt" / (std::string(id) + ".png"), 16);
    save_image(noisy, cfg.output / "noisy" / (std::string(id) + ".png"), 16);
  }
  out << "wrote " << cfg.count << " pairs under " << cfg.output.string() << "\n";
  return kOk;
}

// ---- argument parsing -------------------------------------------------------

/// Parses argv, runs the chosen command and maps failures onto exit codes.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Single-image self-supervised denoising toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::optional<std::string> config_path, corpus, input, clean, checkpoint, output, norm, variant, axis, noise;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs, width, depth, bit_depth, pairs, count, size, channels;
  std::optional<long> iterations;
  std::optional<double> sigma, lr, noise_sigma, pg_a, pg_b;
  std::vector<std::string> values;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--out", output, "output directory (default $P2N_RUN_DIR or ./p2n-run)");
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "pretrained model");
    sub->add_option("--input", input, "noisy image, manifest .json, or directory with noisy/ and gt/");
    sub->add_option("--jobs", jobs, "images trained concurrently");
    sub->add_option("--sigma", sigma, "spread of the renoising scales");
    sub->add_option("--iterations", iterations, "training iterations per image");
    sub->add_option("--lr", lr, "learning rate");
    sub->add_option("--norm", norm, "varying | fixed-2 | fixed-1.5");
    sub->add_option("--pairs", pairs, "renoised pairs per iteration");
    sub->add_option("--variant", variant, "full | noisy-target | independent-noise");
  };

  auto* pre = app.add_subcommand("pretrain", "supervised Gaussian pretraining on clean images");
  common(pre);
  pre->add_option("--corpus", corpus, "directory of clean images (or its gt/ subfolder)");
  pre->add_option("--checkpoint", checkpoint, "where to write the model (default <out>/model.ckpt)");
  pre->add_option("--iterations", iterations, "optimisation steps");
  pre->add_option("--lr", lr, "learning rate");
  pre->add_option("--width", width, "base channel width");
  pre->add_option("--depth", depth, "number of downsampling levels");

  auto* den = app.add_subcommand("denoise", "train on each noisy image and write the result");
  common(den);
  training(den);
  den->add_option("--clean", clean, "clean reference for a single input image");
  den->add_option("--bit-depth", bit_depth, "8 or 16");

  auto* ana = app.add_subcommand("analyze-noise", "residual statistics of paired noisy/clean data");
  common(ana);
  ana->add_option("--input", input, "noisy image, manifest .json, or directory with noisy/ and gt/");
  ana->add_option("--clean", clean, "clean reference for a single input image");

  auto* ev = app.add_subcommand("eval", "PSNR/SSIM after per-image training over a paired dataset");
  common(ev);
  training(ev);

  auto* abl = app.add_subcommand("ablate", "rerun evaluation once per value of one setting");
  common(abl);
  training(abl);
  abl->add_option("--axis", axis, "sigma | norm-mode | component");
  abl->add_option("--values", values, "comma separated values")->delimiter(',');

  auto* syn = app.add_subcommand("synth", "write a synthetic paired corpus");
  common(syn);
  syn->add_option("--count", count, "number of images");
  syn->add_option("--size", size, "side length in pixels");
  syn->add_option("--channels", channels, "1 or 3");
  syn->add_option("--noise", noise, "gaussian | poisson-gaussian");
  syn->add_option("--noise-sigma", noise_sigma, "Gaussian std in [0,1] units");
  syn->add_option("--pg-a", pg_a, "Poisson gain");
  syn->add_option("--pg-b", pg_b, "read-noise variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    RunConfig cfg;
    if (const char* env = std::getenv("P2N_RUN_DIR"); env && *env) cfg.output = env;
    else cfg.output = "p2n-run";
    if (config_path) {
      const fs::path p = *config_path;
      apply_json(cfg, read_json(p, "--config"), p.parent_path());
    }
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (corpus) cfg.corpus = fs::path(*corpus);
    if (input) cfg.input = fs::path(*input);
    if (clean) cfg.clean = fs::path(*clean);
    if (checkpoint) cfg.checkpoint = fs::path(*checkpoint);
    if (output) cfg.output = *output;
    if (width) cfg.arch.base_width = *width;
    if (depth) cfg.arch.depth = *depth;
    if (bit_depth) cfg.bit_depth = *bit_depth;
    if (sigma) cfg.train.sigma = *sigma;
    if (norm) cfg.train.norm_mode = parse_norm_mode(*norm);
    if (variant) cfg.train.variant = parse_variant(*variant);
    if (pairs) cfg.train.pairs_per_iteration = *pairs;
    if (axis) cfg.axis = parse_axis(*axis);
    if (!values.empty()) cfg.values = values;
    if (count) cfg.count = *count;
    if (size) cfg.size = *size;
    if (channels) cfg.channels = *channels;
    if (noise) {
      if (*noise == "gaussian") cfg.noise.kind = NoiseKind::gaussian;
      else if (*noise == "poisson-gaussian") cfg.noise.kind = NoiseKind::poisson_gaussian;
      else throw ConfigError("synth.noise", "expected gaussian or poisson-gaussian");
    }
    if (noise_sigma) cfg.noise.gaussian_sigma = *noise_sigma;
    if (pg_a) cfg.noise.pg_a = *pg_a;
    if (pg_b) cfg.noise.pg_b = *pg_b;
    if (cfg.jobs < 1) throw ConfigError("jobs", "must be >= 1");

    if (*pre) {
      if (iterations) cfg.pretrain.iterations = *iterations;
      if (lr) cfg.pretrain.learning_rate = *lr;
      return cmd_pretrain(cfg, out, err);
    }
    if (iterations) cfg.train.iterations = *iterations;
    if (lr) cfg.train.learning_rate = *lr;
    if (*den) return cmd_denoise(cfg, out, err);
    if (*ana) return cmd_analyze_noise(cfg, out, err);
    if (*ev) return cmd_eval(cfg, out, err);
    if (*abl) return cmd_ablate(cfg, out, err);
    if (*syn) return cmd_synth(cfg, out, err);
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingReferenceError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace p2n::cli
