// Pretrains a small network on procedural scenes, then adapts it to one
// noisy image with the consistency objective and prints the PSNR at each
// stage.
//
//   ./denoise_synthetic [iterations]

#include <cstdlib>
#include <iostream>

#include "p2n/p2n.hpp"

int main(int argc, char** argv) {
  using namespace p2n;
  const long iterations = argc > 1 ? std::atol(argv[1]) : 100;

  std::vector<Image> corpus;
  for (int i = 0; i < 8; ++i) corpus.push_back(synthetic_scene(96, 96, 1, RngStream(1, "corpus/" + std::to_string(i))));

  ArchitectureConfig arch;
  arch.base_width = 16;
  PretrainConfig pre;
  pre.iterations = 300;
  auto model = pretrain_gaussian(make_denoiser(arch, 1), pre, corpus).model;

  const Image clean = synthetic_scene(96, 96, 1, RngStream(2, "test"));
  RngStream noise_rng(2, "noise");
  const Image noisy = add_noise(clean, NoiseSpec::gaussian(25.0 / 255.0), noise_rng);

  std::cout << "noisy        " << psnr(noisy, clean) << " dB\n";
  std::cout << "pretrained   " << psnr(model.forward(noisy), clean) << " dB\n";

  TrainConfig cfg;
  cfg.iterations = iterations;
  const auto report = train_single_image(model, noisy, cfg, clean);
  const auto conv = convergence_report(report);
  std::cout << "after " << iterations << " its " << psnr(report.final_denoised, clean) << " dB  (plateau at "
            << conv.plateau_iteration << ", collapse: " << to_string(report.collapse) << ")\n";
}
