#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "p2n/p2n.hpp"

namespace p2n::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag = "p2n") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

inline Image scene(int side, const std::string& id, std::uint64_t seed = 7, int channels = 1) {
  return synthetic_scene(side, side, channels, RngStream(seed, id));
}

inline Image gaussian_noisy(const Image& clean, double sigma, const std::string& id, std::uint64_t seed = 9) {
  RngStream rng(seed, "noise/" + id);
  return add_noise(clean, NoiseSpec::gaussian(sigma), rng);
}

/// Tiny, fast network for unit tests.
inline DenoiserModel tiny_model(std::uint64_t seed = 1, int channels = 1) {
  ArchitectureConfig a;
  a.channels = channels;
  a.base_width = 4;
  a.depth = 2;
  return make_denoiser(a, seed);
}

}  // namespace p2n::testing
