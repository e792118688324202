#include <gtest/gtest.h>

#include <cmath>

#include "p2n/p2n.hpp"
#include "support/fixtures.hpp"
#include "support/stubs.hpp"

using namespace p2n;
namespace t = p2n::testing;

TEST(Rdc, IdentityModelLeavesNothingToRenoise) {
  const t::IdentityStub id;
  const auto y = t::gaussian_noisy(t::scene(16, "rdc"), 0.1, "rdc");
  RngStream rng(1, "rdc");
  const auto pair = rdc_construct(id, y, 0.75, rng);
  for (double v : pair.n_hat.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(pair.y_p, y);
  EXPECT_EQ(pair.y_n, y);
  EXPECT_EQ(pair.x_hat, y);
}

TEST(Rdc, ZeroSigmaReproducesInput) {
  const t::LinearStub lin;
  const auto y = t::gaussian_noisy(t::scene(16, "fixed"), 0.1, "fixed");
  RngStream rng(1, "fixed");
  const auto pair = rdc_construct(lin, y, 0.0, rng);
  EXPECT_EQ(pair.sigma_p, 1.0);
  EXPECT_EQ(pair.sigma_n, 1.0);
  EXPECT_LE(max_abs_diff(pair.y_p.data(), y.data()), 1e-12);
}

// One pixel, F(0.5) = 0.4, sigma_n = 1.2, sigma_p = 0.8:
// n_hat = 0.1, y_p = 0.4 + 0.12 = 0.52, y_n = 0.4 - 0.08 = 0.32.
TEST(Rdc, OnePixelHandExample) {
  const t::OffsetStub off;
  const Image y(1, 1, 1, 0.5);
  const auto pair = renoise(y, off.forward(y), 0.8, 1.2);
  EXPECT_NEAR(pair.n_hat[0], 0.1, 1e-15);
  EXPECT_NEAR(pair.y_p[0], 0.52, 1e-15);
  EXPECT_NEAR(pair.y_n[0], 0.32, 1e-15);
}

TEST(Rdc, DrawOrderIsNegativeScaleFirst) {
  RngStream a(3, "scales"), b(3, "scales");
  const auto s = draw_scales(0.5, a);
  const double first = b.normal(1.0, 0.5);
  const double second = b.normal(1.0, 0.5);
  EXPECT_EQ(s.sigma_n, first);
  EXPECT_EQ(s.sigma_p, second);
  EXPECT_THROW(draw_scales(-0.1, a), ParameterError);
}

TEST(Rdc, ReconstructionIdentitiesRandomized) {
  RngStream rng(17, "identities");
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    t::LinearStub lin;
    for (double& k : lin.kernel) k = rng.uniform(-0.3, 0.5);
    lin.gain = rng.uniform(0.2, 1.5);
    const int h = static_cast<int>(rng.uniform_int(1, 12)), w = static_cast<int>(rng.uniform_int(1, 12));
    Image y(h, w, rng.uniform() < 0.5 ? 1 : 3);
    for (double& v : y.data()) v = rng.uniform(-0.2, 1.2);
    const auto p = rdc_construct(lin, y, rng.uniform(0.0, 1.0), rng);
    ASSERT_EQ(p.y_p.shape(), y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
      worst = std::max(worst, std::abs(p.y_p[i] - p.x_hat[i] - p.sigma_n * p.n_hat[i]));
      worst = std::max(worst, std::abs(p.x_hat[i] - p.y_n[i] - p.sigma_p * p.n_hat[i]));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

// Averaged over the scale draws, E[y_p] = y and E[y_n] = 2 x_hat - y.
TEST(Rdc, ExpectationOverScales) {
  const Image y(1, 1, 1, 0.7);
  const Image x_hat(1, 1, 1, 0.5);
  RngStream rng(2, "expect");
  double sum_p = 0, sum_n = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto s = draw_scales(0.75, rng);
    const auto p = renoise(y, x_hat, s.sigma_p, s.sigma_n);
    sum_p += p.y_p[0];
    sum_n += p.y_n[0];
  }
  const double tol = 4.0 * 0.75 * 0.2 / std::sqrt(n);
  EXPECT_NEAR(sum_p / n, 0.7, tol);
  EXPECT_NEAR(sum_n / n, 0.3, tol);
}

TEST(Gamma, ScheduleEndpoints) {
  EXPECT_EQ(gamma_schedule(0, 300, 2.0, 1.5), 2.0);
  EXPECT_EQ(gamma_schedule(300, 300, 2.0, 1.5), 1.5);
  EXPECT_DOUBLE_EQ(gamma_schedule(150, 300, 2.0, 1.5), 1.75);
  EXPECT_THROW(gamma_schedule(301, 300, 2.0, 1.5), ParameterError);
  EXPECT_THROW(gamma_schedule(0, 0, 2.0, 1.5), ParameterError);
}

TEST(Gamma, NormModes) {
  TrainConfig c;
  c.iterations = 100;
  EXPECT_EQ(c.gamma_at(0), 2.0);
  EXPECT_DOUBLE_EQ(c.gamma_at(50), 1.75);
  c.norm_mode = NormMode::fixed_2;
  EXPECT_EQ(c.gamma_at(50), 2.0);
  c.norm_mode = NormMode::fixed_1_5;
  EXPECT_EQ(c.gamma_at(0), 1.5);
}

TEST(DcsLoss, HandValues) {
  const Image a(4, 4, 1, 0.3);
  EXPECT_NEAR(dcs_loss(a, a, 2.0, 1e-8), 1e-16, 1e-30);
  EXPECT_NEAR(dcs_loss(Image(1, 1, 1, 0.1), Image(1, 1, 1, 0.0), 2.0, 1e-8), (0.1 + 1e-8) * (0.1 + 1e-8), 1e-18);
  // eps moves 0.04^1.5 = 0.008 by 1.5 * 0.2 * 1e-8 = 3e-9.
  const double l = dcs_loss(Image(1, 1, 1, 0.04), Image(1, 1, 1, 0.0), 1.5, 1e-8);
  EXPECT_NEAR(l, std::pow(0.04 + 1e-8, 1.5), 1e-17);
  EXPECT_NEAR(l, 0.008, 3.1e-9);
}

TEST(DcsLoss, SymmetricAndMonotone) {
  RngStream rng(8, "dcs");
  Image a(6, 6, 1), b(6, 6, 1);
  for (double& v : a.data()) v = rng.uniform();
  for (double& v : b.data()) v = rng.uniform();
  for (double g : {1.5, 1.75, 2.0}) {
    EXPECT_DOUBLE_EQ(dcs_loss(a, b, g, 1e-8), dcs_loss(b, a, g, 1e-8));
    Image far = b;
    for (std::size_t i = 0; i < far.size(); ++i) far[i] = a[i] + 2.0 * (b[i] - a[i]);
    EXPECT_GT(dcs_loss(a, far, g, 1e-8), dcs_loss(a, b, g, 1e-8));
  }
  EXPECT_THROW(dcs_loss(a, Image(5, 6, 1), 2.0, 1e-8), ShapeError);
  EXPECT_THROW(dcs_loss(a, b, 0.0, 1e-8), ParameterError);
}

TEST(DcsLoss, AnalyticGradientMatchesDifferences) {
  const std::vector<double> a{0.3, -0.2, 0.05}, b{0.1, 0.1, 0.05};
  std::vector<double> g;
  detail::consistency_norm(a, b, 1.75, 1e-8, &g);
  for (std::size_t i = 0; i < 2; ++i) {
    auto ap = a, am = a;
    ap[i] += 1e-7;
    am[i] -= 1e-7;
    const double fd = (detail::consistency_norm(ap, b, 1.75, 1e-8, nullptr) -
                       detail::consistency_norm(am, b, 1.75, 1e-8, nullptr)) / 2e-7;
    EXPECT_NEAR(g[i], fd, 1e-6);
  }
}

TEST(Training, ZeroIterationsIsPlainForward) {
  auto m = t::tiny_model(11);
  const auto y = t::gaussian_noisy(t::scene(24, "zero"), 0.1, "zero");
  const auto expected = m.forward(y);
  TrainConfig c;
  c.iterations = 0;
  const auto r = train_single_image(m, y, c);
  EXPECT_TRUE(r.loss_history.empty());
  EXPECT_EQ(r.final_denoised, expected);
}

TEST(Training, DeterministicUnderFixedSeed) {
  const auto base = t::tiny_model(12);
  const auto clean = t::scene(24, "tdet");
  const auto y = t::gaussian_noisy(clean, 0.1, "tdet");
  TrainConfig c;
  c.iterations = 8;
  c.learning_rate = 1e-3;
  auto m1 = base, m2 = base;
  const auto r1 = train_single_image(m1, y, c, clean);
  const auto r2 = train_single_image(m2, y, c, clean);
  EXPECT_EQ(r1.loss_history, r2.loss_history);
  EXPECT_EQ(*r1.psnr_history, *r2.psnr_history);
  EXPECT_EQ(r1.final_denoised, r2.final_denoised);
  EXPECT_EQ(m1, m2);
  EXPECT_EQ(r1.loss_history.size(), 8u);
  for (double l : r1.loss_history) EXPECT_TRUE(std::isfinite(l));
  EXPECT_FALSE(m1 == base);

  auto m3 = base;
  c.seed = 99;
  const auto r3 = train_single_image(m3, y, c, clean);
  EXPECT_NE(r1.loss_history, r3.loss_history);
}

TEST(Training, VariantsRun) {
  const auto clean = t::scene(16, "var");
  const auto y = t::gaussian_noisy(clean, 0.1, "var");
  for (auto v : {Variant::full, Variant::noisy_target, Variant::independent_noise}) {
    for (bool detach : {false, true}) {
      auto m = t::tiny_model(13);
      TrainConfig c;
      c.iterations = 3;
      c.variant = v;
      c.detach_prediction = detach;
      c.pairs_per_iteration = 2;
      const auto r = train_single_image(m, y, c, clean);
      EXPECT_EQ(r.loss_history.size(), 3u);
      EXPECT_TRUE(m.parameters_finite());
    }
  }
}

TEST(Training, HugeLearningRateDiverges) {
  auto m = t::tiny_model(14);
  const auto y = t::gaussian_noisy(t::scene(16, "div"), 0.3, "div");
  TrainConfig c;
  c.iterations = 200;
  c.learning_rate = 1e30;
  EXPECT_THROW(train_single_image(m, y, c), DivergenceError);
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  c.sigma = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.gamma_start = 1.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.gamma");
  }
}

TEST(Collapse, StubsAreFlagged) {
  const auto clean = t::scene(64, "col");
  const auto y = t::gaussian_noisy(clean, 25.0 / 255.0, "col");
  EXPECT_EQ(collapse_check(t::ConstantStub{}, y), CollapseStatus::zero_map);
  EXPECT_EQ(collapse_check(t::IdentityStub{}, y), CollapseStatus::identity_map);
  // Identity on a clean image is not a collapse symptom.
  EXPECT_EQ(collapse_check(t::IdentityStub{}, Image(64, 64, 1, 0.5)), CollapseStatus::ok);
  EXPECT_EQ(collapse_check(t::LinearStub{}, y), CollapseStatus::ok);
}

TEST(Collapse, NoiseEstimateTracksSigma) {
  const auto clean = t::scene(128, "est");
  for (double s : {0.02, 0.05, 0.1}) {
    const auto y = t::gaussian_noisy(clean, s, "est" + std::to_string(s));
    EXPECT_NEAR(estimate_noise_std(y), s, 0.15 * s);
  }
}

TEST(Taylor, LinearStubIsExact) {
  const t::LinearStub lin{.gain = 0.8};
  const auto y = t::gaussian_noisy(t::scene(24, "tl"), 0.1, "tl");
  for (double shrink : {1.0, 0.1, 0.01}) {
    RngStream rng(1, "taylor");
    EXPECT_LE(taylor_consistency_check(lin, y, shrink, rng), 1e-6) << shrink;
  }
}

TEST(Taylor, SquareStubSmallRemainder) {
  const t::SquareStub sq;
  const auto y = t::gaussian_noisy(Image(16, 16, 1, 0.5), 0.1, "ts");
  RngStream rng(1, "taylor");
  EXPECT_LE(taylor_consistency_check(sq, y, 0.01, rng), 0.02);
}

// For F(x) = x^2 the discrepancy is exactly quadratic in the shrink factor
// once the scale draw is held fixed.
TEST(Taylor, HalvingShrinkQuartersDiscrepancy) {
  const t::SquareStub sq;
  const auto y = t::gaussian_noisy(Image(16, 16, 1, 0.5), 0.1, "tr");
  for (std::uint64_t seed : {1, 2, 3}) {
    RngStream r1(seed, "taylor"), r2(seed, "taylor");
    const auto a = taylor_consistency_detail(sq, y, 0.02, r1);
    const auto b = taylor_consistency_detail(sq, y, 0.01, r2);
    const double ratio = a.discrepancy / b.discrepancy;
    EXPECT_GE(ratio, 3.0);
    EXPECT_LE(ratio, 5.0);
  }
}

TEST(Taylor, Indeterminate) {
  const auto y = t::gaussian_noisy(Image(8, 8, 1, 0.5), 0.1, "ti");
  RngStream rng(1, "taylor");
  EXPECT_THROW(taylor_consistency_check(t::IdentityStub{}, y, 0.01, rng), IndeterminateError);
  EXPECT_THROW(taylor_consistency_check(t::ConstantStub{}, y, 0.01, rng), IndeterminateError);
  EXPECT_THROW(taylor_consistency_check(t::LinearStub{}, y, 0.0, rng), ParameterError);
}
