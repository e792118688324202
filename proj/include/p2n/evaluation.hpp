#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "p2n/dataset.hpp"
#include "p2n/engine.hpp"
#include "p2n/errors.hpp"
#include "p2n/io.hpp"
#include "p2n/metrics.hpp"
#include "p2n/parallel.hpp"

namespace p2n {

struct MetricResult {
  double psnr = 0.0;
  double ssim = 0.0;
  std::string image_id;
};

inline MetricResult measure(const Image& estimate, const Image& clean, std::string id) {
  return {psnr(estimate, clean), ssim(estimate, clean), std::move(id)};
}

struct ConvergenceSummary {
  long plateau_iteration = 0;
  double post_plateau_range = 0.0;
};

/// First iteration i such that max - min of psnr[i..] is within
/// `tolerance_db`, together with that tail's range.
inline ConvergenceSummary convergence_report(const std::vector<double>& psnr_history, double tolerance_db = 0.5) {
  if (psnr_history.empty()) throw MissingReferenceError("convergence report needs a non-empty PSNR history");
  const std::size_t n = psnr_history.size();
  // Suffix extrema, scanned from the back.
  std::vector<double> hi(n), lo(n);
  hi[n - 1] = lo[n - 1] = psnr_history[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    hi[i] = std::max(hi[i + 1], psnr_history[i]);
    lo[i] = std::min(lo[i + 1], psnr_history[i]);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (hi[i] - lo[i] <= tolerance_db) return {static_cast<long>(i), hi[i] - lo[i]};
  return {static_cast<long>(n - 1), 0.0};
}

inline ConvergenceSummary convergence_report(const TrainReport& report, double tolerance_db = 0.5) {
  if (!report.psnr_history) throw MissingReferenceError("train report has no PSNR history (no clean reference)");
  return convergence_report(*report.psnr_history, tolerance_db);
}

/// A noisy image with its clean reference, held in memory.
struct EvalSample {
  std::string id;
  Image noisy;
  std::optional<Image> clean;
};

inline std::vector<EvalSample> load_samples(const DatasetManifest& manifest) {
  std::vector<EvalSample> out;
  for (const auto& e : manifest.entries) {
    EvalSample s{e.id, load_image(e.noisy), std::nullopt};
    if (e.clean) s.clean = load_image(*e.clean);
    out.push_back(std::move(s));
  }
  return out;
}

enum class AblationAxis { sigma, norm_mode, component };

inline const char* to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::sigma: return "sigma";
    case AblationAxis::norm_mode: return "norm-mode";
    case AblationAxis::component: return "component";
  }
  return "?";
}

inline AblationAxis parse_axis(const std::string& s) {
  if (s == "sigma") return AblationAxis::sigma;
  if (s == "norm-mode" || s == "norm") return AblationAxis::norm_mode;
  if (s == "component") return AblationAxis::component;
  throw ConfigError("ablation.axis", "unknown axis '" + s + "' (sigma, norm-mode, component)");
}

inline const char* to_string(NormMode m) {
  switch (m) {
    case NormMode::varying: return "varying";
    case NormMode::fixed_2: return "fixed-2";
    case NormMode::fixed_1_5: return "fixed-1.5";
  }
  return "?";
}

inline NormMode parse_norm_mode(const std::string& s) {
  if (s == "varying") return NormMode::varying;
  if (s == "fixed-2") return NormMode::fixed_2;
  if (s == "fixed-1.5") return NormMode::fixed_1_5;
  throw ConfigError("train.norm", "unknown norm mode '" + s + "' (varying, fixed-2, fixed-1.5)");
}

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::noisy_target: return "noisy-target";
    case Variant::independent_noise: return "independent-noise";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "noisy-target") return Variant::noisy_target;
  if (s == "independent-noise") return Variant::independent_noise;
  throw ConfigError("ablation.values", "unknown component '" + s + "' (full, noisy-target, independent-noise)");
}

struct AblationSpec {
  AblationAxis axis = AblationAxis::sigma;
  std::vector<std::string> values;
};

/// Applies one axis value to a copy of the base configuration.
inline TrainConfig apply_axis_value(TrainConfig cfg, AblationAxis axis, const std::string& value) {
  switch (axis) {
    case AblationAxis::sigma: {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size()) throw ConfigError("ablation.values", "'" + value + "' is not a number");
      cfg.sigma = v;
      break;
    }
    case AblationAxis::norm_mode: cfg.norm_mode = parse_norm_mode(value); break;
    case AblationAxis::component: cfg.variant = parse_variant(value); break;
  }
  cfg.validate();
  return cfg;
}

struct AblationRow {
  std::string value;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<MetricResult> per_image;
};

struct AblationGrid {
  AblationAxis axis = AblationAxis::sigma;
  std::vector<AblationRow> rows;

  std::vector<std::string> values() const {
    std::vector<std::string> v;
    for (const auto& r : rows) v.push_back(r.value);
    return v;
  }
};

/// Outcome of training on every sample once with a fixed configuration.
struct EvaluationRun {
  std::vector<MetricResult> denoised;
  std::vector<MetricResult> noisy;
  std::vector<TrainReport> reports;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Trains a fresh copy of `pretrained` on each sample (stream id = sample
/// id) and scores the result against the clean reference.
inline EvaluationRun evaluate(const std::vector<EvalSample>& samples, const DenoiserModel& pretrained,
                              const TrainConfig& config, int jobs = 1) {
  config.validate();
  for (const auto& s : samples)
    if (!s.clean) throw MissingReferenceError("entry '" + s.id + "' has no clean reference");
  EvaluationRun run;
  run.denoised.resize(samples.size());
  run.noisy.resize(samples.size());
  run.reports.resize(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    DenoiserModel model = pretrained;
    run.reports[i] = train_single_image(model, samples[i].noisy, config, samples[i].clean, samples[i].id);
    run.denoised[i] = measure(run.reports[i].final_denoised, *samples[i].clean, samples[i].id);
    run.noisy[i] = measure(samples[i].noisy, *samples[i].clean, samples[i].id);
  });
  for (const auto& m : run.denoised) {
    run.mean_psnr += m.psnr / static_cast<double>(samples.size());
    run.mean_ssim += m.ssim / static_cast<double>(samples.size());
  }
  return run;
}

/// One full per-image training run per (axis value, sample); no state is
/// shared between values.
inline AblationGrid run_ablation(const AblationSpec& spec, const std::vector<EvalSample>& samples,
                                 const DenoiserModel& pretrained, const TrainConfig& base, int jobs = 1) {
  if (spec.values.empty()) throw ConfigError("ablation.values", "value grid is empty");
  std::set<std::string> seen;
  for (const auto& v : spec.values)
    if (!seen.insert(v).second) throw ConfigError("ablation.values", "duplicate value '" + v + "'");
  for (const auto& s : samples)
    if (!s.clean) throw MissingReferenceError("entry '" + s.id + "' has no clean reference");
  if (samples.empty()) throw ConfigError("dataset", "no samples to evaluate");

  std::vector<TrainConfig> configs;
  for (const auto& v : spec.values) configs.push_back(apply_axis_value(base, spec.axis, v));

  const std::size_t n = samples.size();
  std::vector<MetricResult> cells(configs.size() * n);
  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    const auto& s = samples[k % n];
    DenoiserModel model = pretrained;
    auto report = train_single_image(model, s.noisy, configs[k / n], std::nullopt, s.id);
    cells[k] = measure(report.final_denoised, *s.clean, s.id);
  });

  AblationGrid grid;
  grid.axis = spec.axis;
  for (std::size_t v = 0; v < configs.size(); ++v) {
    AblationRow row;
    row.value = spec.values[v];
    for (std::size_t i = 0; i < n; ++i) {
      row.per_image.push_back(cells[v * n + i]);
      row.mean_psnr += cells[v * n + i].psnr / static_cast<double>(n);
      row.mean_ssim += cells[v * n + i].ssim / static_cast<double>(n);
    }
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

inline AblationGrid run_ablation(const AblationSpec& spec, const DatasetManifest& dataset,
                                 const DenoiserModel& pretrained, const TrainConfig& base, int jobs = 1) {
  for (const auto& e : dataset.entries)
    if (!e.clean) throw MissingReferenceError("entry '" + e.id + "' has no clean reference");
  return run_ablation(spec, load_samples(dataset), pretrained, base, jobs);
}

// ---- serialisation -------------------------------------------------------

inline nlohmann::json to_json(const MetricResult& m) {
  return {{"image_id", m.image_id}, {"psnr", m.psnr}, {"ssim", m.ssim}};
}

inline nlohmann::json to_json(const AblationGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : g.rows) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : r.per_image) per.push_back(to_json(m));
    rows.push_back({{"value", r.value}, {"mean_psnr", r.mean_psnr}, {"mean_ssim", r.mean_ssim}, {"per_image", per}});
  }
  return {{"axis", to_string(g.axis)}, {"rows", rows}};
}

namespace detail {
inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}
}  // namespace detail

/// One row per axis value; columns PSNR/SSIM for the named dataset.
inline std::string to_csv(const AblationGrid& g, const std::string& dataset = "desk") {
  std::ostringstream os;
  os << to_string(g.axis) << "," << dataset << "_psnr," << dataset << "_ssim\n";
  for (const auto& r : g.rows)
    os << r.value << "," << detail::fixed(r.mean_psnr, 4) << "," << detail::fixed(r.mean_ssim, 6) << "\n";
  return os.str();
}

/// Per-image table plus a trailing mean row.
inline std::string to_csv(const std::vector<MetricResult>& results) {
  std::ostringstream os;
  os << "image_id,psnr,ssim\n";
  double p = 0.0, s = 0.0;
  for (const auto& m : results) {
    os << m.image_id << "," << detail::fixed(m.psnr, 4) << "," << detail::fixed(m.ssim, 6) << "\n";
    p += m.psnr;
    s += m.ssim;
  }
  if (!results.empty()) {
    const double n = static_cast<double>(results.size());
    os << "mean," << detail::fixed(p / n, 4) << "," << detail::fixed(s / n, 6) << "\n";
  }
  return os.str();
}

/// Deterministic content only; wall time is kept out so that identical
/// runs serialise to identical bytes.
inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j{{"iterations", r.loss_history.size()},
                   {"loss_history", r.loss_history},
                   {"collapse", to_string(r.collapse)},
                   {"collapse_flag", r.collapse_flag}};
  if (r.psnr_history) {
    j["psnr_history"] = *r.psnr_history;
    if (!r.psnr_history->empty()) {
      const auto c = convergence_report(r);
      j["plateau_iteration"] = c.plateau_iteration;
      j["post_plateau_psnr_range"] = c.post_plateau_range;
    }
  }
  if (r.collapse_flag) j["warning"] = std::string("trivial-solution collapse detected: ") + to_string(r.collapse);
  return j;
}

inline std::string to_json_text(const ResidualStats& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& b : s.histogram) hist.push_back({{"center", b.center}, {"frequency", b.frequency}});
  nlohmann::json j{{"mean", s.mean},
                   {"std", s.stddev},
                   {"skewness", s.skewness},
                   {"sample_count", s.sample_count},
                   {"mean_bound_3sigma", s.sample_count ? 3.0 * s.stddev / std::sqrt(static_cast<double>(s.sample_count)) : 0.0},
                   {"max_bin_asymmetry", histogram_asymmetry(s)},
                   {"bins", s.histogram.size()},
                   {"histogram", hist}};
  return j.dump(2);
}

inline std::string histogram_csv(const ResidualStats& s) {
  std::ostringstream os;
  os << "bin_center,frequency\n";
  os << std::setprecision(10);
  for (const auto& b : s.histogram) os << b.center << "," << b.frequency << "\n";
  return os.str();
}

}  // namespace p2n
