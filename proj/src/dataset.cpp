#include "editlab/dataset.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "editlab/rng.hpp"

namespace editlab {

bool Prompt::valid() const {
  return shape_id >= 0 && shape_id < kShapeVocab && position_id >= 0 && position_id < kPositionVocab &&
         intensity_id >= 0 && intensity_id < kIntensityVocab;
}

std::string Prompt::to_string() const {
  std::ostringstream os;
  os << shape_id << ':' << position_id << ':' << intensity_id;
  return os.str();
}

Prompt Prompt::parse(const std::string& s) {
  Prompt p;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> p.shape_id >> c1 >> p.position_id >> c2 >> p.intensity_id) || c1 != ':' || c2 != ':' || !p.valid()) {
    throw std::invalid_argument("cannot parse prompt '" + s + "' (expected s:p:i with valid token ids)");
  }
  return p;
}

std::string Prompt::describe() const {
  static const char* shapes[] = {"null", "disk", "square", "cross"};
  static const char* positions[] = {"null", "NW", "NE", "SW", "SE"};
  static const char* intensities[] = {"null", "low", "mid", "high"};
  if (!valid()) return "invalid";
  return std::string(shapes[shape_id]) + "/" + positions[position_id] + "/" + intensities[intensity_id];
}

int combo_count() { return 3 * 4 * 3; }

Prompt combo_prompt(int combo) {
  if (combo < 0 || combo >= combo_count()) {
    throw std::invalid_argument("combo " + std::to_string(combo) + " out of range");
  }
  Prompt p;
  p.intensity_id = combo % 3 + 1;
  p.position_id = (combo / 3) % 4 + 1;
  p.shape_id = combo / 12 + 1;
  return p;
}

int prompt_combo(const Prompt& p) {
  if (!p.valid() || p.shape_id == 0 || p.position_id == 0 || p.intensity_id == 0) {
    throw std::invalid_argument("prompt " + p.to_string() + " is not a concrete attribute tuple");
  }
  return (p.shape_id - 1) * 12 + (p.position_id - 1) * 3 + (p.intensity_id - 1);
}

double intensity_level(int intensity_id) {
  switch (intensity_id) {
    case 1: return 0.45;
    case 2: return 0.70;
    case 3: return 0.95;
    default: throw std::invalid_argument("intensity id " + std::to_string(intensity_id) + " has no level");
  }
}

namespace {

struct Center {
  double row, col;
};

Center quadrant_center(int position_id, int s) {
  const double lo = static_cast<double>(s) / 4.0 - 0.5;
  const double hi = 3.0 * static_cast<double>(s) / 4.0 - 0.5;
  switch (position_id) {
    case 1: return {lo, lo};  // NW
    case 2: return {lo, hi};  // NE
    case 3: return {hi, lo};  // SW
    case 4: return {hi, hi};  // SE
    default: throw std::invalid_argument("position id " + std::to_string(position_id) + " has no quadrant");
  }
}

bool covers(int shape_id, double dr, double dc, double r) {
  switch (shape_id) {
    case 1:  // disk
      return dr * dr + dc * dc <= r * r;
    case 2:  // square
      return std::abs(dr) <= r * 0.82 && std::abs(dc) <= r * 0.82;
    case 3:  // cross
      return (std::abs(dr) <= r && std::abs(dc) <= r * 0.38) || (std::abs(dc) <= r && std::abs(dr) <= r * 0.38);
    default:
      throw std::invalid_argument("shape id " + std::to_string(shape_id) + " has no raster");
  }
}

}  // namespace

Tensor render_sample(const DatasetSpec& spec, const Prompt& p, int sample_index) {
  if (!p.valid() || p.is_null() || p.shape_id == 0 || p.position_id == 0 || p.intensity_id == 0) {
    throw std::invalid_argument("render_sample: prompt " + p.to_string() + " is not renderable");
  }
  const int s = spec.image_size;
  if (s < 8) throw std::invalid_argument("render_sample: image_size must be >= 8");
  const Center c = quadrant_center(p.position_id, s);
  const double radius = static_cast<double>(s) * 0.21;
  const double fg = intensity_level(p.intensity_id);

  std::vector<double> img(static_cast<size_t>(s) * static_cast<size_t>(s), spec.background);
  for (int r = 0; r < s; ++r) {
    for (int col = 0; col < s; ++col) {
      if (covers(p.shape_id, r - c.row, col - c.col, radius)) img[static_cast<size_t>(r * s + col)] = fg;
    }
  }
  if (spec.jitter > 0.0) {
    Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(prompt_combo(p)) * 1000003ull +
                                    static_cast<uint64_t>(sample_index)));
    for (double& v : img) {
      v += rng.uniform(-spec.jitter, spec.jitter);
      v = std::min(std::max(v, 0.0), 1.0);
    }
  }
  return Tensor({1, s, s}, std::move(img));
}

std::vector<LabeledImage> generate_dataset(const DatasetSpec& spec, bool eval_split) {
  const int count = eval_split ? spec.eval_samples_per_combo : spec.samples_per_combo;
  const int start = eval_split ? spec.samples_per_combo : 0;
  if (count <= 0) throw std::invalid_argument("generate_dataset: sample count must be positive");
  std::vector<LabeledImage> out;
  out.reserve(static_cast<size_t>(combo_count() * count));
  for (int combo = 0; combo < combo_count(); ++combo) {
    const Prompt p = combo_prompt(combo);
    for (int i = start; i < start + count; ++i) {
      out.push_back({render_sample(spec, p, i), p, combo, i});
    }
  }
  return out;
}

}  // namespace editlab
