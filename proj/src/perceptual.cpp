#include "editlab/perceptual.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "editlab/nn.hpp"
#include "editlab/ops.hpp"
#include "editlab/rng.hpp"
#include "editlab/tape.hpp"

namespace editlab {

namespace {

void check_image_range(const char* op, const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0) {
      throw std::invalid_argument(std::string(op) + ": pixel value " + std::to_string(x[i]) + " outside [0,1]");
    }
  }
}

std::array<Tensor, 3> trunk_features(const Tensor& x, const NamedTensors& p) {
  const Tensor s1 = softplus(add_channel(conv2d(x, p.get("c1.k")), p.get("c1.b")));
  const Tensor s2 = softplus(add_channel(conv2d(avg_pool2x(s1), p.get("c2.k")), p.get("c2.b")));
  const Tensor s3 = softplus(add_channel(conv2d(avg_pool2x(s2), p.get("c3.k")), p.get("c3.b")));
  return {s1, s2, s3};
}

Tensor unit_normalize(const Tensor& v) {
  const Tensor inv = div(Tensor::scalar(1.0), sqrt(add(sum(square(v)), 1e-12)));
  return mul(v, inv);
}

Tensor image_tower(const Tensor& x, const NamedTensors& p) {
  Tensor h = softplus(add_channel(conv2d(x, p.get("img1.k")), p.get("img1.b")));
  h = avg_pool2x(h);
  h = softplus(add_channel(conv2d(h, p.get("img2.k")), p.get("img2.b")));
  h = avg_pool2x(h);
  return unit_normalize(affine(global_mean_pool(h), p.get("img_proj.w"), p.get("img_proj.b")));
}

Tensor prompt_tower(const Prompt& prompt, const NamedTensors& p) {
  if (!prompt.valid()) throw std::invalid_argument("prompt " + prompt.to_string() + " has out-of-range token ids");
  const Tensor e = add(add(embedding_row(p.get("emb.shape"), prompt.shape_id),
                           embedding_row(p.get("emb.position"), prompt.position_id)),
                       embedding_row(p.get("emb.intensity"), prompt.intensity_id));
  return unit_normalize(affine(e, p.get("prm_proj.w"), p.get("prm_proj.b")));
}

/// Cross-entropy of one logits vector against a label, assembled from
/// primitive ops (constant max shift for stability).
Tensor cross_entropy(const Tensor& logits, int64_t label) {
  double m = logits[0];
  for (int64_t i = 1; i < logits.numel(); ++i) m = std::max(m, logits[i]);
  const Tensor shifted = sub(logits, m);
  const Tensor lse = add(log(sum(exp(shifted))), m);
  const Tensor picked = reshape(slice(logits, {{label, label + 1, 1}}), {1});
  return sub(lse, picked);
}

}  // namespace

PerceptualParams init_perceptual(const PerceptualConfig& cfg) {
  if (cfg.channels.size() != 3) throw std::invalid_argument("perceptual: channels must list three stages");
  PerceptualParams p;
  p.arch = cfg;
  Rng rng(mix_seed(cfg.seed, "perceptual.init"));
  const int c0 = cfg.image_channels, c1 = cfg.channels[0], c2 = cfg.channels[1], c3 = cfg.channels[2];
  p.params.add("c1.k", he_normal(rng, {c1, c0, 3, 3}, c0 * 9));
  p.params.add("c1.b", Tensor::zeros({c1}));
  p.params.add("c2.k", he_normal(rng, {c2, c1, 3, 3}, c1 * 9));
  p.params.add("c2.b", Tensor::zeros({c2}));
  p.params.add("c3.k", he_normal(rng, {c3, c2, 3, 3}, c2 * 9));
  p.params.add("c3.b", Tensor::zeros({c3}));
  p.params.add("w1", Tensor::full({c1}, 1.0));
  p.params.add("w2", Tensor::full({c2}, 1.0));
  p.params.add("w3", Tensor::full({c3}, 1.0));
  p.params.add("head_shape.w", he_normal(rng, {c3, 3}, c3));
  p.params.add("head_shape.b", Tensor::zeros({3}));
  p.params.add("head_position.w", he_normal(rng, {c3, 4}, c3));
  p.params.add("head_position.b", Tensor::zeros({4}));
  p.params.add("head_intensity.w", he_normal(rng, {c3, 3}, c3));
  p.params.add("head_intensity.b", Tensor::zeros({3}));
  return p;
}

AlignmentParams init_alignment(const PerceptualConfig& cfg) {
  AlignmentParams a;
  a.arch = cfg;
  Rng rng(mix_seed(cfg.seed, "alignment.init"));
  const int c0 = cfg.image_channels, c1 = cfg.channels[0], c2 = cfg.channels[1], d = cfg.embed_dim;
  a.params.add("img1.k", he_normal(rng, {c1, c0, 3, 3}, c0 * 9));
  a.params.add("img1.b", Tensor::zeros({c1}));
  a.params.add("img2.k", he_normal(rng, {c2, c1, 3, 3}, c1 * 9));
  a.params.add("img2.b", Tensor::zeros({c2}));
  a.params.add("img_proj.w", he_normal(rng, {c2, d}, c2));
  a.params.add("img_proj.b", Tensor::zeros({d}));
  a.params.add("emb.shape", normal_tensor(rng, {Prompt::kShapeVocab, d}, 0.5));
  a.params.add("emb.position", normal_tensor(rng, {Prompt::kPositionVocab, d}, 0.5));
  a.params.add("emb.intensity", normal_tensor(rng, {Prompt::kIntensityVocab, d}, 0.5));
  a.params.add("prm_proj.w", he_normal(rng, {d, d}, d));
  a.params.add("prm_proj.b", Tensor::zeros({d}));
  return a;
}

Tensor perceptual_distance(const Tensor& x, const Tensor& y, const PerceptualParams& params) {
  if (!x.same_shape(y)) {
    throw std::invalid_argument("perceptual_distance: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  }
  check_image_range("perceptual_distance", x);
  check_image_range("perceptual_distance", y);
  const std::array<Tensor, 3> fx = trunk_features(x, params.params);
  const std::array<Tensor, 3> fy = trunk_features(y, params.params);
  static const char* weight_names[] = {"w1", "w2", "w3"};
  Tensor total = Tensor::scalar(0.0);
  for (int s = 0; s < 3; ++s) {
    const Tensor d = sub(channel_l2_normalize(fx[static_cast<size_t>(s)]),
                         channel_l2_normalize(fy[static_cast<size_t>(s)]));
    const Tensor weighted = mul_channel(square(d), params.params.get(weight_names[s]));
    total = add(total, mul(mean(weighted), static_cast<double>(d.dim(0))));
  }
  return total;
}

double psnr(const Tensor& x, const Tensor& y, double max_value) {
  if (!x.same_shape(y)) {
    throw std::invalid_argument("psnr: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  }
  if (max_value <= 0.0) throw std::invalid_argument("psnr: max_value must be positive");
  double mse = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - y[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.numel());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(max_value * max_value / mse);
}

Tensor alignment_image_embedding(const Tensor& x, const AlignmentParams& params) {
  check_image_range("alignment_score", x);
  return image_tower(x, params.params);
}

Tensor alignment_prompt_embedding(const Prompt& p, const AlignmentParams& params) {
  return prompt_tower(p, params.params);
}

double alignment_score(const Tensor& x, const Prompt& p, const AlignmentParams& params) {
  if (!params.trained) throw std::runtime_error("alignment_score: alignment params are untrained");
  const Tensor ix = alignment_image_embedding(x, params);
  const Tensor pe = alignment_prompt_embedding(p, params);
  return sum(mul(ix, pe)).value();
}

std::pair<PerceptualParams, AlignmentParams> train_perceptual(const std::vector<LabeledImage>& dataset,
                                                              const PerceptualConfig& cfg,
                                                              PerceptualTrainReport* report) {
  if (dataset.empty()) throw std::invalid_argument("train_perceptual: empty dataset");
  PerceptualParams perc = init_perceptual(cfg);
  AlignmentParams align = init_alignment(cfg);

  if (cfg.feature_mode != "trained" && cfg.feature_mode != "random") {
    throw std::invalid_argument("perceptual: feature_mode must be 'trained' or 'random', got '" + cfg.feature_mode +
                                "'");
  }

  if (cfg.feature_mode == "trained") {
    Rng rng(mix_seed(cfg.seed, "perceptual.train"));
    std::vector<int64_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    for (int epoch = 0; epoch < cfg.classifier_epochs; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      int64_t seen = 0;
      for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
        const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
        const std::vector<int64_t> batch(order.begin() + static_cast<int64_t>(pos),
                                         order.begin() + static_cast<int64_t>(end));
        const double loss = sgd_minibatch(perc.params, batch, cfg.lr, [&](const NamedTensors& w, int64_t s) {
          const LabeledImage& item = dataset[static_cast<size_t>(s)];
          const auto feats = trunk_features(item.image, w);
          const Tensor g = global_mean_pool(feats[2]);
          Tensor loss_t = cross_entropy(affine(g, w.get("head_shape.w"), w.get("head_shape.b")),
                                        item.prompt.shape_id - 1);
          loss_t = add(loss_t, cross_entropy(affine(g, w.get("head_position.w"), w.get("head_position.b")),
                                             item.prompt.position_id - 1));
          loss_t = add(loss_t, cross_entropy(affine(g, w.get("head_intensity.w"), w.get("head_intensity.b")),
                                             item.prompt.intensity_id - 1));
          return loss_t;
        });
        loss_sum += loss * static_cast<double>(batch.size());
        seen += static_cast<int64_t>(batch.size());
      }
      const double epoch_loss = loss_sum / static_cast<double>(seen);
      if (!std::isfinite(epoch_loss)) throw std::runtime_error("train_perceptual: non-finite classifier loss");
      if (report) report->classifier_epoch_loss.push_back(epoch_loss);
    }
  }

  // Alignment: batches of distinct combos, symmetric hinge over in-batch
  // negatives.
  {
    Rng rng(mix_seed(cfg.seed, "alignment.train"));
    std::vector<std::vector<int64_t>> by_combo(static_cast<size_t>(combo_count()));
    for (size_t i = 0; i < dataset.size(); ++i) {
      by_combo[static_cast<size_t>(dataset[i].combo)].push_back(static_cast<int64_t>(i));
    }
    std::vector<int> combos;
    for (int c = 0; c < combo_count(); ++c) {
      if (!by_combo[static_cast<size_t>(c)].empty()) combos.push_back(c);
    }
    if (combos.size() < 2) throw std::invalid_argument("train_perceptual: need at least two prompt combos");
    const int bsz = std::min<int>(cfg.align_batch, static_cast<int>(combos.size()));

    for (int epoch = 0; epoch < cfg.align_epochs; ++epoch) {
      rng.shuffle(combos);
      double loss_sum = 0.0;
      int batches = 0;
      for (size_t pos = 0; pos + static_cast<size_t>(bsz) <= combos.size(); pos += static_cast<size_t>(bsz)) {
        Tape tape;
        Tape::Scope scope(tape);
        const NamedTensors w = align.params.watch_all(tape);
        std::vector<Tensor> ie, pe;
        for (int k = 0; k < bsz; ++k) {
          const int combo = combos[pos + static_cast<size_t>(k)];
          const auto& pool = by_combo[static_cast<size_t>(combo)];
          const LabeledImage& item = dataset[static_cast<size_t>(pool[static_cast<size_t>(
              rng.uniform_int(static_cast<int64_t>(pool.size())))])];
          ie.push_back(image_tower(item.image, w));
          pe.push_back(prompt_tower(item.prompt, w));
        }
        std::vector<Tensor> diag(static_cast<size_t>(bsz));
        for (int i = 0; i < bsz; ++i) diag[static_cast<size_t>(i)] = sum(mul(ie[static_cast<size_t>(i)], pe[static_cast<size_t>(i)]));
        Tensor loss_t = Tensor::scalar(0.0);
        for (int i = 0; i < bsz; ++i) {
          for (int j = 0; j < bsz; ++j) {
            if (i == j) continue;
            const Tensor sij = sum(mul(ie[static_cast<size_t>(i)], pe[static_cast<size_t>(j)]));
            loss_t = add(loss_t, relu(add(sub(sij, diag[static_cast<size_t>(i)]), cfg.margin)));
            loss_t = add(loss_t, relu(add(sub(sij, diag[static_cast<size_t>(j)]), cfg.margin)));
          }
        }
        loss_t = mul(loss_t, 1.0 / (2.0 * bsz * (bsz - 1)));
        loss_sum += loss_t.value();
        ++batches;
        const Gradients grads = tape.backward(loss_t);
        for (const auto& [name, p] : align.params.items()) {
          const Tensor g = grads.grad(w.get(name));
          std::vector<double> next = p.values();
          for (size_t j = 0; j < next.size(); ++j) next[j] -= cfg.align_lr * g[static_cast<int64_t>(j)];
          align.params.set(name, Tensor(p.shape(), std::move(next)));
        }
      }
      const double epoch_loss = batches ? loss_sum / batches : 0.0;
      if (!std::isfinite(epoch_loss)) throw std::runtime_error("train_perceptual: non-finite alignment loss");
      if (report) report->align_epoch_loss.push_back(epoch_loss);
    }
  }
  align.trained = true;
  return {std::move(perc), std::move(align)};
}

double classifier_accuracy(const PerceptualParams& params, const std::vector<LabeledImage>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("classifier_accuracy: empty dataset");
  auto argmax = [](const Tensor& t) {
    int64_t best = 0;
    for (int64_t i = 1; i < t.numel(); ++i) {
      if (t[i] > t[best]) best = i;
    }
    return best;
  };
  int64_t hits = 0;
  for (const LabeledImage& item : dataset) {
    const auto feats = trunk_features(item.image, params.params);
    const Tensor g = global_mean_pool(feats[2]);
    const bool ok =
        argmax(affine(g, params.params.get("head_shape.w"), params.params.get("head_shape.b"))) ==
            item.prompt.shape_id - 1 &&
        argmax(affine(g, params.params.get("head_position.w"), params.params.get("head_position.b"))) ==
            item.prompt.position_id - 1 &&
        argmax(affine(g, params.params.get("head_intensity.w"), params.params.get("head_intensity.b"))) ==
            item.prompt.intensity_id - 1;
    if (ok) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double alignment_margin(const AlignmentParams& params, const std::vector<LabeledImage>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("alignment_margin: empty dataset");
  double matched = 0.0, mismatched = 0.0;
  int64_t mm = 0;
  static const int offsets[] = {5, 17, 29};
  for (const LabeledImage& item : dataset) {
    matched += alignment_score(item.image, item.prompt, params);
    for (int off : offsets) {
      mismatched += alignment_score(item.image, combo_prompt((item.combo + off) % combo_count()), params);
      ++mm;
    }
  }
  return matched / static_cast<double>(dataset.size()) - mismatched / static_cast<double>(mm);
}

void save_perceptual(const std::string& path, const PerceptualParams& perceptual, const AlignmentParams& alignment) {
  NamedTensors all;
  const PerceptualConfig& a = perceptual.arch;
  all.add("meta.arch", Tensor({6}, {static_cast<double>(a.channels[0]), static_cast<double>(a.channels[1]),
                                    static_cast<double>(a.channels[2]), static_cast<double>(a.image_size),
                                    static_cast<double>(a.image_channels), static_cast<double>(a.embed_dim)}));
  all.add("meta.feature_mode", Tensor::scalar(a.feature_mode == "trained" ? 1.0 : 0.0));
  all.add("meta.align_trained", Tensor::scalar(alignment.trained ? 1.0 : 0.0));
  for (const auto& [name, t] : perceptual.params.items()) all.add("perc." + name, t);
  for (const auto& [name, t] : alignment.params.items()) all.add("align." + name, t);
  save_tensors(path, all);
}

std::pair<PerceptualParams, AlignmentParams> load_perceptual(const std::string& path) {
  const NamedTensors all = load_tensors(path);
  PerceptualConfig cfg;
  const Tensor& arch = all.get("meta.arch");
  cfg.channels = {static_cast<int>(arch[0]), static_cast<int>(arch[1]), static_cast<int>(arch[2])};
  cfg.image_size = static_cast<int>(arch[3]);
  cfg.image_channels = static_cast<int>(arch[4]);
  cfg.embed_dim = static_cast<int>(arch[5]);
  cfg.feature_mode = all.get("meta.feature_mode").value() == 1.0 ? "trained" : "random";
  PerceptualParams perc;
  perc.arch = cfg;
  AlignmentParams align;
  align.arch = cfg;
  align.trained = all.get("meta.align_trained").value() == 1.0;
  for (const auto& [name, t] : all.items()) {
    if (name.rfind("perc.", 0) == 0) perc.params.add(name.substr(5), t);
    if (name.rfind("align.", 0) == 0) align.params.add(name.substr(6), t);
  }
  for (const char* w : {"w1", "w2", "w3"}) {
    const Tensor& t = perc.params.get(w);
    for (int64_t i = 0; i < t.numel(); ++i) {
      if (t[i] < 0.0) throw std::runtime_error("perceptual checkpoint '" + path + "': negative channel weight");
    }
  }
  if (!perc.params.all_finite() || !align.params.all_finite()) {
    throw std::runtime_error("perceptual checkpoint '" + path + "' contains non-finite values");
  }
  return {std::move(perc), std::move(align)};
}

}  // namespace editlab
