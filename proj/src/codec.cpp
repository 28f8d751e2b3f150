#include "editlab/codec.hpp"

#include <cmath>
#include <stdexcept>

#include "editlab/nn.hpp"
#include "editlab/ops.hpp"
#include "editlab/rng.hpp"

namespace editlab {

CodecMode codec_mode_from_string(const std::string& s) {
  if (s == "identity") return CodecMode::Identity;
  if (s == "autoencoder") return CodecMode::Autoencoder;
  throw std::invalid_argument("unknown codec mode '" + s + "' (expected identity or autoencoder)");
}

const char* codec_mode_name(CodecMode m) { return m == CodecMode::Identity ? "identity" : "autoencoder"; }

Shape CodecParams::image_shape() const {
  return {arch.image_channels, arch.image_size, arch.image_size};
}

Shape CodecParams::latent_shape() const {
  if (arch.mode == CodecMode::Identity) return image_shape();
  return {arch.latent_channels, arch.image_size / 2, arch.image_size / 2};
}

CodecParams init_codec(const CodecConfig& cfg) {
  CodecParams p;
  p.arch = cfg;
  if (cfg.mode == CodecMode::Identity) return p;
  if (cfg.image_size % 2 != 0) throw std::invalid_argument("autoencoder codec needs an even image size");
  Rng rng(mix_seed(cfg.seed, "codec.init"));
  const int64_t c = cfg.image_channels, h = cfg.hidden, l = cfg.latent_channels, d = cfg.dec_hidden;
  p.params.add("enc1.k", he_normal(rng, {h, c, 3, 3}, c * 9));
  p.params.add("enc1.b", Tensor::zeros({h}));
  p.params.add("enc2.k", he_normal(rng, {l, h, 3, 3}, h * 9));
  p.params.add("enc2.b", Tensor::zeros({l}));
  p.params.add("dec1.k", he_normal(rng, {h, l, 3, 3}, l * 9));
  p.params.add("dec1.b", Tensor::zeros({h}));
  p.params.add("dec2.k", he_normal(rng, {d, h, 3, 3}, h * 9));
  p.params.add("dec2.b", Tensor::zeros({d}));
  p.params.add("dec3.k", he_normal(rng, {c, d, 3, 3}, d * 9));
  p.params.add("dec3.b", Tensor::zeros({c}));
  return p;
}

namespace {

void check_image(const Tensor& x, const CodecParams& codec) {
  if (x.shape() != codec.image_shape()) {
    throw std::invalid_argument("encode: image shape " + x.shape_str() + " does not match declared " +
                                shape_to_string(codec.image_shape()));
  }
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0) {
      throw std::invalid_argument("encode: pixel value " + std::to_string(x[i]) + " outside [0,1]");
    }
  }
}

Tensor decode_net(const Tensor& z, const NamedTensors& p) {
  Tensor h = softplus(add_channel(conv2d(z, p.get("dec1.k")), p.get("dec1.b")));
  h = upsample_nearest2x(h);
  h = softplus(add_channel(conv2d(h, p.get("dec2.k")), p.get("dec2.b")));
  return sigmoid(add_channel(conv2d(h, p.get("dec3.k")), p.get("dec3.b")));
}

Tensor encode_net(const Tensor& x, const NamedTensors& p) {
  Tensor h = softplus(add_channel(conv2d(x, p.get("enc1.k")), p.get("enc1.b")));
  h = avg_pool2x(h);
  return tanh(add_channel(conv2d(h, p.get("enc2.k")), p.get("enc2.b")));
}

}  // namespace

Tensor encode(const Tensor& x, const CodecParams& codec) {
  check_image(x, codec);
  if (codec.arch.mode == CodecMode::Identity) return x;
  return encode_net(x, codec.params);
}

Tensor decode(const Tensor& z, const CodecParams& codec) {
  if (z.shape() != codec.latent_shape()) {
    throw std::invalid_argument("decode: latent shape " + z.shape_str() + " does not match declared " +
                                shape_to_string(codec.latent_shape()));
  }
  if (codec.arch.mode == CodecMode::Identity) return clamp01(z);
  return decode_net(z, codec.params);
}

CodecParams train_codec(const std::vector<LabeledImage>& dataset, const CodecConfig& cfg, TrainReport* report) {
  if (dataset.empty()) throw std::invalid_argument("train_codec: empty dataset");
  CodecParams codec = init_codec(cfg);
  if (cfg.mode == CodecMode::Identity) return codec;

  Rng rng(mix_seed(cfg.seed, "codec.train"));
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
      const double loss = sgd_minibatch(codec.params, batch, cfg.lr, [&](const NamedTensors& w, int64_t s) {
        const Tensor& x = dataset[static_cast<size_t>(s)].image;
        return mean(square(sub(decode_net(encode_net(x, w), w), x)));
      });
      loss_sum += loss * static_cast<double>(batch.size());
      seen += static_cast<int64_t>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(seen);
    if (!std::isfinite(epoch_loss)) throw std::runtime_error("train_codec: non-finite loss");
    if (report) report->epoch_loss.push_back(epoch_loss);
  }
  return codec;
}

void save_codec(const std::string& path, const CodecParams& params) {
  NamedTensors all;
  const CodecConfig& a = params.arch;
  all.add("meta.mode", Tensor::scalar(a.mode == CodecMode::Identity ? 0.0 : 1.0));
  all.add("meta.arch", Tensor({5}, {static_cast<double>(a.image_size), static_cast<double>(a.image_channels),
                                    static_cast<double>(a.latent_channels), static_cast<double>(a.hidden),
                                    static_cast<double>(a.dec_hidden)}));
  for (const auto& [name, t] : params.params.items()) all.add("p." + name, t);
  save_tensors(path, all);
}

CodecParams load_codec(const std::string& path) {
  const NamedTensors all = load_tensors(path);
  CodecParams p;
  p.arch.mode = all.get("meta.mode").value() == 0.0 ? CodecMode::Identity : CodecMode::Autoencoder;
  const Tensor& arch = all.get("meta.arch");
  p.arch.image_size = static_cast<int>(arch[0]);
  p.arch.image_channels = static_cast<int>(arch[1]);
  p.arch.latent_channels = static_cast<int>(arch[2]);
  p.arch.hidden = static_cast<int>(arch[3]);
  p.arch.dec_hidden = static_cast<int>(arch[4]);
  for (const auto& [name, t] : all.items()) {
    if (name.rfind("p.", 0) == 0) p.params.add(name.substr(2), t);
  }
  if (p.arch.mode == CodecMode::Autoencoder) {
    const CodecParams fresh = init_codec(p.arch);
    for (const auto& [name, t] : fresh.params.items()) {
      if (!p.params.has(name) || p.params.get(name).shape() != t.shape()) {
        throw std::runtime_error("codec checkpoint '" + path + "' does not match the declared architecture (" +
                                 name + ")");
      }
    }
  }
  if (!p.params.all_finite()) throw std::runtime_error("codec checkpoint '" + path + "' contains non-finite values");
  return p;
}

}  // namespace editlab
