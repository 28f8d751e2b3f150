#pragma once

#include <cstdint>
#include <vector>

#include "editlab/prompt.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

/// Procedural stand-in corpus: one grayscale shape per image, placed in a
/// quadrant at one of three intensity levels, plus seeded pixel jitter.
struct DatasetSpec {
  int image_size = 16;
  int samples_per_combo = 8;
  int eval_samples_per_combo = 4;
  double jitter = 0.02;
  double background = 0.05;
  uint64_t seed = 1234;
};

struct LabeledImage {
  Tensor image;  // (1, S, S), values in [0,1]
  Prompt prompt;
  int combo = 0;
  int sample_index = 0;
};

/// 3 shapes x 4 positions x 3 intensities.
int combo_count();
Prompt combo_prompt(int combo);
int prompt_combo(const Prompt& p);

/// Deterministic rasterization of one sample; reproducible from
/// (spec, combo, sample_index) alone.
Tensor render_sample(const DatasetSpec& spec, const Prompt& p, int sample_index);

/// Train split uses sample indices [0, samples_per_combo); the eval split
/// continues at samples_per_combo.
std::vector<LabeledImage> generate_dataset(const DatasetSpec& spec, bool eval_split);

double intensity_level(int intensity_id);

}  // namespace editlab
