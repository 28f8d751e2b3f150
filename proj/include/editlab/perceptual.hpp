#pragma once

#include <string>
#include <utility>
#include <vector>

#include "editlab/checkpoint.hpp"
#include "editlab/dataset.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

struct PerceptualConfig {
  std::vector<int> channels = {8, 16, 32};  // three conv stages
  std::string feature_mode = "trained";     // "trained" or "random"
  int image_size = 16;
  int image_channels = 1;
  int embed_dim = 16;    // alignment embedding
  double margin = 0.5;   // contrastive hinge margin
  // training
  int classifier_epochs = 60;
  int align_epochs = 80;
  int batch_size = 16;
  int align_batch = 12;
  double lr = 0.05;
  double align_lr = 0.05;
  uint64_t seed = 1;
};

/// Feature extractor behind the perceptual distance: a three-stage conv
/// trunk (trained as an attribute classifier) plus non-negative per-stage
/// channel weights.
struct PerceptualParams {
  PerceptualConfig arch;
  NamedTensors params;
};

/// Two-tower prompt-alignment scorer; both towers emit unit-norm vectors.
struct AlignmentParams {
  PerceptualConfig arch;
  NamedTensors params;
  bool trained = false;
};

PerceptualParams init_perceptual(const PerceptualConfig& cfg);
AlignmentParams init_alignment(const PerceptualConfig& cfg);

/// Feature-space distance: per stage, channel-normalized feature maps,
/// weighted squared differences, spatial average, summed over stages.
/// Returns a scalar tensor; differentiable w.r.t. x under tracing;
/// symmetric; zero on identical inputs.
Tensor perceptual_distance(const Tensor& x, const Tensor& y, const PerceptualParams& params);

/// 10*log10(max_value^2 / MSE); 99.0 dB when MSE == 0.
double psnr(const Tensor& x, const Tensor& y, double max_value);

/// Cosine similarity between the unit-norm image and prompt embeddings.
double alignment_score(const Tensor& x, const Prompt& p, const AlignmentParams& params);

Tensor alignment_image_embedding(const Tensor& x, const AlignmentParams& params);
Tensor alignment_prompt_embedding(const Prompt& p, const AlignmentParams& params);

struct PerceptualTrainReport {
  std::vector<double> classifier_epoch_loss;
  std::vector<double> align_epoch_loss;
};

/// Trains the classifier trunk (unless feature_mode == "random") and the
/// alignment towers (symmetric contrastive hinge over in-batch negatives).
std::pair<PerceptualParams, AlignmentParams> train_perceptual(const std::vector<LabeledImage>& dataset,
                                                              const PerceptualConfig& cfg,
                                                              PerceptualTrainReport* report = nullptr);

/// Fraction of images whose three attribute heads are all predicted
/// correctly.
double classifier_accuracy(const PerceptualParams& params, const std::vector<LabeledImage>& dataset);

/// Mean matched-pair score minus mean mismatched-pair score.
double alignment_margin(const AlignmentParams& params, const std::vector<LabeledImage>& dataset);

void save_perceptual(const std::string& path, const PerceptualParams& perceptual, const AlignmentParams& alignment);
std::pair<PerceptualParams, AlignmentParams> load_perceptual(const std::string& path);

}  // namespace editlab
