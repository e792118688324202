// Residual statistics of synthetic Gaussian and Poisson-Gaussian noise,
// plus a mirrored copy of one noisy observation.

#include <iostream>

#include "p2n/p2n.hpp"

int main() {
  using namespace p2n;
  const Image clean = synthetic_scene(128, 128, 1, RngStream(3, "scene"));

  for (const auto& [name, spec] : {std::pair{"gaussian", NoiseSpec::gaussian(0.1)},
                                   std::pair{"poisson-gaussian", NoiseSpec::poisson_gaussian(0.02, 1e-4)}}) {
    RngStream rng(3, name);
    std::vector<Image> noisy;
    for (int k = 0; k < 8; ++k) noisy.push_back(add_noise(clean, spec, rng));
    const auto s = residual_stats(noisy, clean);
    std::cout << name << ": mean " << s.mean << "  std " << s.stddev << "  skewness " << s.skewness
              << "  max bin asymmetry " << histogram_asymmetry(s) << "\n";
  }

  RngStream rng(3, "mirror");
  const Image y = add_noise(clean, NoiseSpec::gaussian(0.1), rng);
  const Image mirrored = opposite_noisy(y, clean);
  std::cout << "mirrored copy PSNR " << psnr(mirrored, clean) << " dB vs original " << psnr(y, clean) << " dB\n";
}
