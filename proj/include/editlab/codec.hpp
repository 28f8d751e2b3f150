#pragma once

#include <string>
#include <vector>

#include "editlab/checkpoint.hpp"
#include "editlab/dataset.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

enum class CodecMode { Identity, Autoencoder };

CodecMode codec_mode_from_string(const std::string& s);
const char* codec_mode_name(CodecMode m);

struct CodecConfig {
  CodecMode mode = CodecMode::Autoencoder;
  int image_size = 16;
  int image_channels = 1;
  int latent_channels = 4;
  int hidden = 16;
  int dec_hidden = 8;
  // training
  int epochs = 60;
  int batch_size = 16;
  double lr = 0.05;
  uint64_t seed = 1;
};

struct CodecParams {
  CodecConfig arch;
  NamedTensors params;  // empty in identity mode

  Shape image_shape() const;
  Shape latent_shape() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

CodecParams init_codec(const CodecConfig& cfg);

/// Image [0,1] of the declared shape -> latent. Identity mode is bit-exact.
Tensor encode(const Tensor& x, const CodecParams& codec);

/// Latent -> image in [0,1]; differentiable under tracing (the output range
/// is enforced by a smooth saturation, not a hard clamp, in autoencoder
/// mode).
Tensor decode(const Tensor& z, const CodecParams& codec);

/// Pixel-MSE reconstruction training; no-op for identity mode.
CodecParams train_codec(const std::vector<LabeledImage>& dataset, const CodecConfig& cfg,
                        TrainReport* report = nullptr);

void save_codec(const std::string& path, const CodecParams& params);
CodecParams load_codec(const std::string& path);

}  // namespace editlab
