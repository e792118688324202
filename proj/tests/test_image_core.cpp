#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "p2n/p2n.hpp"
#include "support/fixtures.hpp"

using namespace p2n;
using p2n::testing::TempDir;

namespace {

void expect_all(const Image& img, double value, double tol = 0.0) {
  for (double v : img.data()) ASSERT_NEAR(v, value, tol);
}

}  // namespace

TEST(Image, RejectsBadShapes) {
  EXPECT_THROW(Image(0, 4, 1), ShapeError);
  EXPECT_THROW(Image(4, 4, 2), ShapeError);
  EXPECT_THROW(Image(Shape{2, 2, 1}, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(Image(Shape{1, 1, 1}, std::vector<double>{std::nan("")}), FormatError);
}

TEST(Image, ArithmeticNeverClamps) {
  Image a(2, 2, 1, 0.9);
  Image b(2, 2, 1, -0.4);
  NoiseResidual r = a - b;  // 1.3
  Image up = a + r;         // 2.2
  Image down = b - r;       // -1.7
  expect_all(up, 2.2, 1e-12);
  expect_all(down, -1.7, 1e-12);
  expect_all(up.clamped(), 1.0);
  expect_all(down.clamped(), 0.0);
}

TEST(Image, ShapeMismatchThrows) {
  EXPECT_THROW(Image(2, 2, 1) - Image(2, 3, 1), ShapeError);
  EXPECT_THROW(mse(Image(2, 2, 1), Image(2, 2, 3)), ShapeError);
}

TEST(ImageIo, EightBitExtremes) {
  TempDir dir;
  save_image(Image(5, 7, 1, 1.0), dir / "white.png", 8);
  save_image(Image(5, 7, 3, 0.0), dir / "black.png", 8);
  const auto white = load_image(dir / "white.png");
  const auto black = load_image(dir / "black.png");
  EXPECT_EQ(white.shape(), (Shape{5, 7, 1}));
  EXPECT_EQ(black.shape(), (Shape{5, 7, 3}));
  expect_all(white, 1.0);
  expect_all(black, 0.0);
}

TEST(ImageIo, SixteenBitMidpoint) {
  TempDir dir;
  save_image(Image(3, 3, 1, 32768.0 / 65535.0), dir / "mid.png", 16);
  const auto img = load_image(dir / "mid.png");
  expect_all(img, 32768.0 / 65535.0, 0.0);
  EXPECT_NEAR(img[0], 0.50000763, 1e-8);
}

TEST(ImageIo, SaveClampsThenQuantizes) {
  TempDir dir;
  save_image(Image(2, 2, 1, 1.2), dir / "over.png", 8);
  save_image(Image(2, 2, 1, 0.5), dir / "half.png", 8);
  expect_all(load_image(dir / "over.png"), 1.0);
  // round(0.5 * 255) = 128
  expect_all(load_image(dir / "half.png"), 128.0 / 255.0, 0.0);
}

TEST(ImageIo, TiffRoundTrip) {
  TempDir dir;
  const auto img = p2n::testing::scene(24, "tiff", 3, 3);
  save_image(img, dir / "a.tif", 16);
  save_image(img, dir / "b.tiff", 8);
  const auto a = load_image(dir / "a.tif");
  const auto b = load_image(dir / "b.tiff");
  EXPECT_EQ(a.shape(), img.shape());
  EXPECT_LE(max_abs_diff(a.data(), img.data()), 0.5 / 65535.0 + 1e-12);
  EXPECT_LE(max_abs_diff(b.data(), img.data()), 0.5 / 255.0 + 1e-12);
}

TEST(ImageIo, SixteenBitRoundTripProperty) {
  TempDir dir;
  RngStream rng(42, "roundtrip");
  for (int trial = 0; trial < 20; ++trial) {
    const int h = static_cast<int>(rng.uniform_int(1, 40));
    const int w = static_cast<int>(rng.uniform_int(1, 40));
    const int c = rng.uniform() < 0.5 ? 1 : 3;
    Image x(h, w, c);
    for (double& v : x.data()) v = rng.uniform();
    const auto path = dir / ("rt" + std::to_string(trial) + ".png");
    save_image(x, path, 16);
    const auto back = load_image(path);
    ASSERT_EQ(back.shape(), x.shape());
    ASSERT_LE(max_abs_diff(back.data(), x.data()), 1.0 / 65535.0);
  }
}

TEST(ImageIo, Errors) {
  TempDir dir;
  EXPECT_THROW(load_image(dir / "missing.png"), IoError);
  {
    std::ofstream(dir / "junk.png") << "this is not a png";
  }
  EXPECT_THROW(load_image(dir / "junk.png"), FormatError);
  {
    std::ofstream(dir / "junk.tif") << "nor a tiff";
  }
  EXPECT_THROW(load_image(dir / "junk.tif"), FormatError);
  EXPECT_THROW(save_image(Image(2, 2, 1), dir / "no" / "such" / "dir.png"), IoError);
  EXPECT_THROW(save_image(Image(2, 2, 1), dir / "x.png", 12), ParameterError);
}

TEST(Rng, SameKeyReplays) {
  RngStream a(7, "img-1"), b(7, "img-1");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(Rng, DistinctIdsDiffer) {
  RngStream a(7, "img-1"), b(7, "img-2"), c(8, "img-1");
  int same_b = 0, same_c = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    same_b += x == b.uniform();
    same_c += x == c.uniform();
  }
  EXPECT_EQ(same_b, 0);
  EXPECT_EQ(same_c, 0);
}

TEST(Dataset, PairedAndUnpaired) {
  TempDir dir;
  std::filesystem::create_directories(dir / "noisy");
  std::filesystem::create_directories(dir / "gt");
  for (const char* n : {"a", "b", "c"}) save_image(Image(4, 4, 1, 0.3), dir / "noisy" / (std::string(n) + ".png"));
  for (const char* n : {"a", "c"}) save_image(Image(4, 4, 1, 0.3), dir / "gt" / (std::string(n) + ".png"));
  const auto m = scan_dataset(dir.path());
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[0].id, "a");
  EXPECT_TRUE(m.entries[0].clean.has_value());
  EXPECT_FALSE(m.entries[1].clean.has_value());
  EXPECT_TRUE(m.entries[2].clean.has_value());
  EXPECT_FALSE(m.all_paired());
}

TEST(Dataset, SinglePairAndNoisyOnly) {
  TempDir paired, lone;
  for (auto* d : {&paired, &lone}) std::filesystem::create_directories(*d / "noisy");
  std::filesystem::create_directories(paired / "gt");
  save_image(Image(4, 4, 1), paired / "noisy" / "a.png");
  save_image(Image(4, 4, 1), paired / "gt" / "a.png");
  save_image(Image(4, 4, 1), lone / "noisy" / "a.png");
  const auto p = scan_dataset(paired.path());
  const auto l = scan_dataset(lone.path());
  ASSERT_EQ(p.entries.size(), 1u);
  ASSERT_EQ(l.entries.size(), 1u);
  EXPECT_TRUE(p.entries[0].clean.has_value());
  EXPECT_FALSE(l.entries[0].clean.has_value());
}

TEST(Dataset, EmptyRootWarnsOnly) {
  TempDir dir;
  std::ostringstream warn;
  const auto m = scan_dataset(dir.path(), warn);
  EXPECT_TRUE(m.entries.empty());
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  EXPECT_THROW(scan_dataset(dir / "nope"), IoError);
}

TEST(Dataset, ManifestJsonRoundTrip) {
  TempDir dir;
  std::filesystem::create_directories(dir / "noisy");
  std::filesystem::create_directories(dir / "gt");
  save_image(Image(4, 4, 1), dir / "noisy" / "x.png");
  save_image(Image(4, 4, 1), dir / "gt" / "x.png");
  save_image(Image(4, 4, 1), dir / "noisy" / "y.png");
  const auto m = scan_dataset(dir.path());
  save_manifest(m, dir / "manifest.json");
  EXPECT_EQ(load_manifest(dir / "manifest.json"), m);
}

TEST(Dataset, ManifestValidation) {
  TempDir dir;
  save_image(Image(4, 4, 1), dir / "a.png");
  nlohmann::json dup{{"entries", {{{"id", "a"}, {"noisy", "a.png"}}, {{"id", "a"}, {"noisy", "a.png"}}}}};
  EXPECT_THROW(manifest_from_json(dup, dir.path()), FormatError);
  nlohmann::json missing{{"entries", {{{"id", "a"}, {"noisy", "zzz.png"}}}}};
  EXPECT_THROW(manifest_from_json(missing, dir.path()), IoError);
  nlohmann::json ok{{"entries", {{{"id", "a"}, {"noisy", "a.png"}, {"clean", "a.png"}}}}};
  const auto m = manifest_from_json(ok, dir.path());
  EXPECT_EQ(m.entries[0].noisy, dir / "a.png");
}
