#include "editlab/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "editlab/nn.hpp"
#include "editlab/ops.hpp"
#include "editlab/rng.hpp"
#include "editlab/tape.hpp"

namespace editlab {

namespace {

Tensor embed_impl(const Prompt& p, const DenoiserConfig& arch, const NamedTensors& w) {
  if (!p.valid()) throw std::invalid_argument("embed: prompt " + p.to_string() + " has out-of-range token ids");
  (void)arch;
  const Tensor e = add(add(embedding_row(w.get("emb.shape"), p.shape_id),
                           embedding_row(w.get("emb.position"), p.position_id)),
                       embedding_row(w.get("emb.intensity"), p.intensity_id));
  return affine(e, w.get("emb.proj.w"), w.get("emb.proj.b"));
}

Tensor film(const Tensor& h, const Tensor& cond, const std::string& site, const NamedTensors& w) {
  const int64_t width = h.dim(0);
  const Tensor f = affine(cond, w.get("film." + site + ".w"), w.get("film." + site + ".b"));
  const Tensor scale = reshape(slice(f, {{0, width, 1}}), {width});
  const Tensor shift = reshape(slice(f, {{width, 2 * width, 1}}), {width});
  return add_channel(mul_channel(h, add(scale, 1.0)), shift);
}

Tensor stage(const Tensor& h, const Tensor& cond, const std::string& site, const NamedTensors& w) {
  const Tensor h0 = film(h, cond, site, w);
  Tensor r = softplus(add_channel(conv2d(h0, w.get(site + ".c1.k")), w.get(site + ".c1.b")));
  r = add_channel(conv2d(r, w.get(site + ".c2.k")), w.get(site + ".c2.b"));
  return add(h0, r);
}

Tensor predict_impl(const Tensor& zt, const Tensor& e, int64_t t, const DenoiserConfig& arch,
                    const NamedTensors& w) {
  if (zt.shape() != arch.latent_shape) {
    throw std::invalid_argument("predict_noise: latent shape " + zt.shape_str() + " does not match declared " +
                                shape_to_string(arch.latent_shape));
  }
  if (e.rank() != 1 || e.dim(0) != arch.embed_dim) {
    throw std::invalid_argument("predict_noise: embedding shape " + e.shape_str() + " does not match dim " +
                                std::to_string(arch.embed_dim));
  }
  if (t < 0 || t >= arch.t_max) {
    throw std::invalid_argument("predict_noise: t " + std::to_string(t) + " outside [0," +
                                std::to_string(arch.t_max) + ")");
  }
  const Tensor cond =
      softplus(affine(concat({time_embedding(t, arch.time_dim), e}), w.get("cond.w"), w.get("cond.b")));

  Tensor h = add_channel(conv2d(zt, w.get("stem.k")), w.get("stem.b"));
  const Tensor e1 = stage(h, cond, "enc1", w);
  const Tensor e2 = stage(avg_pool2x(e1), cond, "enc2", w);
  const Tensor m = stage(avg_pool2x(e2), cond, "mid", w);
  const Tensor u1 = add_channel(conv2d(upsample_nearest2x(m), w.get("up1.k")), w.get("up1.b"));
  const Tensor d1 = softplus(add(u1, e2));
  const Tensor u2 = add_channel(conv2d(upsample_nearest2x(d1), w.get("up2.k")), w.get("up2.b"));
  const Tensor d2 = softplus(add(u2, e1));
  return add_channel(conv2d(d2, w.get("out.k")), w.get("out.b"));
}

}  // namespace

DenoiserParams init_denoiser(const DenoiserConfig& cfg) {
  if (cfg.latent_shape.size() != 3 || cfg.latent_shape[1] % 4 != 0 || cfg.latent_shape[2] % 4 != 0) {
    throw std::invalid_argument("denoiser: latent shape " + shape_to_string(cfg.latent_shape) +
                                " must be (C,H,W) with H,W divisible by 4");
  }
  DenoiserParams p;
  p.arch = cfg;
  Rng rng(mix_seed(cfg.seed, "denoiser.init"));
  const int64_t w = cfg.width, de = cfg.embed_dim, dc = cfg.time_dim + cfg.embed_dim;
  const int64_t c = cfg.latent_shape[0];
  p.params.add("emb.shape", normal_tensor(rng, {Prompt::kShapeVocab, de}, 0.5));
  p.params.add("emb.position", normal_tensor(rng, {Prompt::kPositionVocab, de}, 0.5));
  p.params.add("emb.intensity", normal_tensor(rng, {Prompt::kIntensityVocab, de}, 0.5));
  p.params.add("emb.proj.w", he_normal(rng, {de, de}, de));
  p.params.add("emb.proj.b", Tensor::zeros({de}));
  p.params.add("cond.w", he_normal(rng, {dc, w}, dc));
  p.params.add("cond.b", Tensor::zeros({w}));
  p.params.add("stem.k", he_normal(rng, {w, c, 3, 3}, c * 9));
  p.params.add("stem.b", Tensor::zeros({w}));
  for (const char* site : {"enc1", "enc2", "mid"}) {
    const std::string s(site);
    p.params.add("film." + s + ".w", normal_tensor(rng, {w, 2 * w}, 0.05));
    p.params.add("film." + s + ".b", Tensor::zeros({2 * w}));
    p.params.add(s + ".c1.k", he_normal(rng, {w, w, 3, 3}, w * 9));
    p.params.add(s + ".c1.b", Tensor::zeros({w}));
    p.params.add(s + ".c2.k", normal_tensor(rng, {w, w, 3, 3}, 0.05 / std::sqrt(static_cast<double>(w * 9))));
    p.params.add(s + ".c2.b", Tensor::zeros({w}));
  }
  p.params.add("up1.k", he_normal(rng, {w, w, 3, 3}, w * 9));
  p.params.add("up1.b", Tensor::zeros({w}));
  p.params.add("up2.k", he_normal(rng, {w, w, 3, 3}, w * 9));
  p.params.add("up2.b", Tensor::zeros({w}));
  p.params.add("out.k", Tensor::zeros({c, w, 3, 3}));
  p.params.add("out.b", Tensor::zeros({c}));
  return p;
}

Tensor embed(const Prompt& p, const DenoiserParams& params) { return embed_impl(p, params.arch, params.params); }

Tensor predict_noise(const Tensor& zt, const Tensor& prompt_embedding, int64_t t, const DenoiserParams& params) {
  return predict_impl(zt, prompt_embedding, t, params.arch, params.params);
}

DenoiserParams train_denoiser(const std::vector<std::pair<Tensor, Prompt>>& dataset, const NoiseSchedule& sched,
                              const DenoiserConfig& cfg, TrainReport* report) {
  if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
  DenoiserParams model = init_denoiser(cfg);
  for (const auto& [z, p] : dataset) {
    if (z.shape() != cfg.latent_shape) {
      throw std::invalid_argument("train_denoiser: latent shape " + z.shape_str() + " does not match declared " +
                                  shape_to_string(cfg.latent_shape));
    }
  }
  if (sched.T != cfg.t_max) {
    throw std::invalid_argument("train_denoiser: schedule T " + std::to_string(sched.T) +
                                " does not match arch t_max " + std::to_string(cfg.t_max));
  }

  Rng rng(mix_seed(cfg.seed, "denoiser.train"));
  std::vector<int64_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
      const std::vector<int64_t> batch(order.begin() + static_cast<int64_t>(pos),
                                       order.begin() + static_cast<int64_t>(end));
      const double loss = sgd_minibatch(model.params, batch, cfg.lr, [&](const NamedTensors& w, int64_t s) {
        const auto& [z0, prompt] = dataset[static_cast<size_t>(s)];
        const int64_t t = rng.uniform_int(sched.T);
        const Tensor eps = normal_tensor(rng, cfg.latent_shape);
        const Prompt p = rng.uniform() < cfg.p_null ? Prompt::null() : prompt;
        const Tensor zt = add_noise(z0, eps, t, sched);
        const Tensor pred = predict_impl(zt, embed_impl(p, cfg, w), t, cfg, w);
        return mean(square(sub(pred, eps)));
      });
      loss_sum += loss * static_cast<double>(batch.size());
      seen += static_cast<int64_t>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(seen);
    if (!std::isfinite(epoch_loss)) throw std::runtime_error("train_denoiser: non-finite loss");
    if (report) report->epoch_loss.push_back(epoch_loss);
  }
  if (!model.params.all_finite()) throw std::runtime_error("train_denoiser: non-finite parameters");
  return model;
}

void save_denoiser(const std::string& path, const DenoiserParams& params) {
  NamedTensors all;
  const DenoiserConfig& a = params.arch;
  all.add("meta.arch",
          Tensor({7}, {static_cast<double>(a.width), static_cast<double>(a.embed_dim),
                       static_cast<double>(a.time_dim), static_cast<double>(a.latent_shape[0]),
                       static_cast<double>(a.latent_shape[1]), static_cast<double>(a.latent_shape[2]),
                       static_cast<double>(a.t_max)}));
  for (const auto& [name, t] : params.params.items()) all.add("p." + name, t);
  save_tensors(path, all);
}

DenoiserParams load_denoiser(const std::string& path) {
  const NamedTensors all = load_tensors(path);
  DenoiserParams p;
  const Tensor& arch = all.get("meta.arch");
  p.arch.width = static_cast<int>(arch[0]);
  p.arch.embed_dim = static_cast<int>(arch[1]);
  p.arch.time_dim = static_cast<int>(arch[2]);
  p.arch.latent_shape = {static_cast<int64_t>(arch[3]), static_cast<int64_t>(arch[4]),
                         static_cast<int64_t>(arch[5])};
  p.arch.t_max = static_cast<int64_t>(arch[6]);
  for (const auto& [name, t] : all.items()) {
    if (name.rfind("p.", 0) == 0) p.params.add(name.substr(2), t);
  }
  const DenoiserParams fresh = init_denoiser(p.arch);
  for (const auto& [name, t] : fresh.params.items()) {
    if (!p.params.has(name) || p.params.get(name).shape() != t.shape()) {
      throw std::runtime_error("denoiser checkpoint '" + path + "' does not match the declared architecture (" +
                               name + ")");
    }
  }
  if (!p.params.all_finite()) {
    throw std::runtime_error("denoiser checkpoint '" + path + "' contains non-finite values");
  }
  return p;
}

}  // namespace editlab
