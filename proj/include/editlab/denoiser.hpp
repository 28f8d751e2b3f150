#pragma once

#include <string>
#include <utility>
#include <vector>

#include "editlab/checkpoint.hpp"
#include "editlab/codec.hpp"
#include "editlab/prompt.hpp"
#include "editlab/schedule.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

struct DenoiserConfig {
  int width = 32;      // channel width of the residual conv stages
  int embed_dim = 16;  // prompt embedding size
  int time_dim = 16;   // sinusoidal timestep embedding size
  Shape latent_shape = {4, 8, 8};
  int64_t t_max = 1000;
  // training
  int epochs = 60;
  int batch_size = 16;
  double lr = 1e-3;
  double p_null = 0.1;
  uint64_t seed = 1;
};

/// Conditional noise predictor eps_theta(z_t, E, t): residual conv net with
/// two downsampling stages, timestep + prompt conditioning injected through
/// per-stage affine modulation.
struct DenoiserParams {
  DenoiserConfig arch;
  NamedTensors params;
};

DenoiserParams init_denoiser(const DenoiserConfig& cfg);

/// Prompt -> learned embedding: sum of per-slot table rows, then an affine
/// map. The all-zero prompt selects the null rows, learned like any other.
Tensor embed(const Prompt& p, const DenoiserParams& params);

Tensor predict_noise(const Tensor& zt, const Tensor& prompt_embedding, int64_t t, const DenoiserParams& params);

/// Standard ddpm objective: E ||eps - eps_theta(add_noise(z0, eps, t), E, t)||^2
/// with prompts dropped to null with probability p_null.
DenoiserParams train_denoiser(const std::vector<std::pair<Tensor, Prompt>>& dataset, const NoiseSchedule& sched,
                              const DenoiserConfig& cfg, TrainReport* report = nullptr);

void save_denoiser(const std::string& path, const DenoiserParams& params);
DenoiserParams load_denoiser(const std::string& path);

}  // namespace editlab
