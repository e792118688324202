#include <gtest/gtest.h>

#include <cmath>

#include "p2n/p2n.hpp"
#include "support/fixtures.hpp"

using namespace p2n;
namespace t = p2n::testing;

namespace {

Image checkerboard(int side, int cell) {
  Image img(side, side, 1);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) img.at(0, y, x) = ((y / cell + x / cell) % 2) ? 1.0 : 0.0;
  return img;
}

std::vector<EvalSample> tiny_samples(int n, int side = 16) {
  std::vector<EvalSample> out;
  for (int i = 0; i < n; ++i) {
    const std::string id = "s" + std::to_string(i);
    const auto clean = t::scene(side, id);
    out.push_back({id, t::gaussian_noisy(clean, 0.1, id), clean});
  }
  return out;
}

}  // namespace

TEST(Psnr, HandValues) {
  const Image a(8, 8, 1, 0.3);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(Image(4, 4, 1, 0.0), Image(4, 4, 1, 0.1)), 20.0, 1e-12);
  EXPECT_NEAR(psnr(Image(4, 4, 1, 0.0), Image(4, 4, 1, 1.0)), 0.0, 1e-12);
  EXPECT_THROW(psnr(Image(4, 4, 1), Image(4, 5, 1)), ShapeError);
}

TEST(Psnr, SymmetricAndScaleCovariant) {
  const auto a = t::scene(32, "pa");
  const auto b = t::gaussian_noisy(a, 0.05, "pb");
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  Image a3 = a, b3 = b;
  a3 *= 3.0;
  b3 *= 3.0;
  EXPECT_NEAR(psnr(a3, b3, 3.0), psnr(a, b), 1e-9);
}

TEST(Ssim, IdentityAndLuminancePenalty) {
  const auto a = t::scene(32, "sa");
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  Image b = a;
  b += 0.5;
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_THROW(ssim(Image(10, 32, 1), Image(10, 32, 1)), ShapeError);
}

// Reference values from scikit-image structural_similarity with
// gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
// data_range=1.
TEST(Ssim, MatchesReferenceImplementation) {
  const auto cb = checkerboard(64, 8);
  Image inv = cb;
  for (double& v : inv.data()) v = 1.0 - v;
  EXPECT_NEAR(ssim(cb, inv), -0.5794482349347629, 1e-9);
  EXPECT_LE(ssim(cb, inv), 0.0);

  Image ramp(64, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) ramp.at(0, y, x) = (y * 64 + x) / 4095.0;
  Image squeezed = ramp;
  for (double& v : squeezed.data()) v = v * 0.8 + 0.1;
  EXPECT_NEAR(ssim(ramp, squeezed), 0.9706575233056322, 1e-9);
}

TEST(Convergence, ConstantHistory) {
  const auto c = convergence_report(std::vector<double>(50, 31.0));
  EXPECT_EQ(c.plateau_iteration, 0);
  EXPECT_EQ(c.post_plateau_range, 0.0);
}

// Rising line to iteration 40, flat (with small ripple) afterwards.
TEST(Convergence, KneeMatchesBruteForce) {
  std::vector<double> h;
  for (int i = 0; i < 120; ++i) h.push_back(i < 40 ? 20.0 + 0.25 * i : 30.0 + 0.1 * std::sin(i));
  long brute = -1;
  for (std::size_t i = 0; i < h.size() && brute < 0; ++i) {
    const auto [lo, hi] = std::minmax_element(h.begin() + static_cast<long>(i), h.end());
    if (*hi - *lo <= 0.5) brute = static_cast<long>(i);
  }
  const auto c = convergence_report(h);
  EXPECT_EQ(c.plateau_iteration, brute);
  EXPECT_GE(c.plateau_iteration, 37);
  EXPECT_LE(c.plateau_iteration, 40);
  EXPECT_LE(c.post_plateau_range, 0.5);
}

TEST(Convergence, MissingHistory) {
  TrainReport r;
  EXPECT_THROW(convergence_report(r), MissingReferenceError);
  EXPECT_THROW(convergence_report(std::vector<double>{}), MissingReferenceError);
}

TEST(Ablation, SingleValueEqualsPlainEvaluation) {
  const auto samples = tiny_samples(2);
  const auto model = t::tiny_model(21);
  TrainConfig base;
  base.iterations = 4;
  base.learning_rate = 1e-3;
  const auto run = evaluate(samples, model, base);
  const auto grid = run_ablation({AblationAxis::sigma, {"0.75"}}, samples, model, base);
  ASSERT_EQ(grid.rows.size(), 1u);
  EXPECT_EQ(grid.rows[0].mean_psnr, run.mean_psnr);
  EXPECT_EQ(grid.rows[0].mean_ssim, run.mean_ssim);
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(grid.rows[0].per_image[i].psnr, run.denoised[i].psnr);
}

TEST(Ablation, ReproducibleAndJobIndependent) {
  const auto samples = tiny_samples(3);
  const auto model = t::tiny_model(22);
  TrainConfig base;
  base.iterations = 3;
  const AblationSpec spec{AblationAxis::norm_mode, {"varying", "fixed-2", "fixed-1.5"}};
  const auto a = run_ablation(spec, samples, model, base, 1);
  const auto b = run_ablation(spec, samples, model, base, 4);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.values(), spec.values);
}

TEST(Ablation, GridValidation) {
  const auto samples = tiny_samples(1);
  const auto model = t::tiny_model(23);
  const TrainConfig base;
  EXPECT_THROW(run_ablation({AblationAxis::sigma, {}}, samples, model, base), ConfigError);
  EXPECT_THROW(run_ablation({AblationAxis::sigma, {"0.5", "0.5"}}, samples, model, base), ConfigError);
  EXPECT_THROW(run_ablation({AblationAxis::sigma, {"abc"}}, samples, model, base), ConfigError);
  EXPECT_THROW(run_ablation({AblationAxis::component, {"nope"}}, samples, model, base), ConfigError);
  auto unpaired = samples;
  unpaired[0].clean.reset();
  try {
    run_ablation({AblationAxis::sigma, {"0.5"}}, unpaired, model, base);
    FAIL();
  } catch (const MissingReferenceError& e) {
    EXPECT_NE(std::string(e.what()).find("s0"), std::string::npos);
  }
}

TEST(Tables, CsvShapes) {
  AblationGrid g;
  g.axis = AblationAxis::sigma;
  g.rows = {{"0.25", 30.0, 0.8, {}}, {"0.5", 30.5, 0.81, {}}, {"0.75", 30.25, 0.82, {}}};
  const auto csv = to_csv(g);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.rfind("sigma,desk_psnr,desk_ssim\n", 0), 0u);
  EXPECT_NE(csv.find("0.5,30.5000,0.810000"), std::string::npos);

  const std::vector<MetricResult> per{{30.0, 0.8, "a"}, {32.0, 0.9, "b"}};
  const auto table = to_csv(per);
  EXPECT_NE(table.find("mean,31.0000"), std::string::npos);
}

TEST(Tables, ReportJsonHasNoWallTime) {
  TrainReport r;
  r.loss_history = {0.1, 0.05};
  r.psnr_history = std::vector<double>{25.0, 25.1};
  r.final_denoised = Image(2, 2, 1);
  r.wall_time = 12.5;
  const auto j = to_json(r);
  EXPECT_FALSE(j.contains("wall_time"));
  EXPECT_EQ(j.at("loss_history").size(), 2u);
  EXPECT_EQ(j.at("collapse").get<std::string>(), "ok");
}
