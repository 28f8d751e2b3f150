#include "editlab/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "editlab/tape.hpp"

namespace editlab {

Tensor he_normal(Rng& rng, Shape shape, int64_t fan_in) {
  return normal_tensor(rng, std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)));
}

Tensor normal_tensor(Rng& rng, Shape shape, double stddev) {
  const int64_t n = shape_numel(shape);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 1 || w.rank() != 2 || x.dim(0) != w.dim(0)) {
    throw std::invalid_argument("affine: shape mismatch " + x.shape_str() + " vs " + w.shape_str());
  }
  const Tensor y = reshape(matmul(reshape(x, {1, x.dim(0)}), w), {w.dim(1)});
  return add(y, b);
}

Tensor embedding_row(const Tensor& table, int64_t id) {
  if (table.rank() != 2) throw std::invalid_argument("embedding_row: table must be rank 2, got " + table.shape_str());
  if (id < 0 || id >= table.dim(0)) {
    throw std::invalid_argument("embedding_row: id " + std::to_string(id) + " out of range [0," +
                                std::to_string(table.dim(0)) + ")");
  }
  return reshape(slice(table, {{id, id + 1, 1}, {0, table.dim(1), 1}}), {table.dim(1)});
}

Tensor global_mean_pool(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != x.dim(2)) {
    throw std::invalid_argument("global_mean_pool: expects square (C,H,H), got " + x.shape_str());
  }
  Tensor h = x;
  while (h.dim(1) > 1) {
    if (h.dim(1) % 2 != 0) {
      throw std::invalid_argument("global_mean_pool: spatial size must be a power of two, got " + x.shape_str());
    }
    h = avg_pool2x(h);
  }
  return reshape(h, {x.dim(0)});
}

Tensor time_embedding(int64_t t, int64_t dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even and >= 2");
  const int64_t half = dim / 2;
  std::vector<double> v(static_cast<size_t>(dim));
  for (int64_t k = 0; k < half; ++k) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    v[static_cast<size_t>(2 * k)] = std::sin(static_cast<double>(t) * w);
    v[static_cast<size_t>(2 * k + 1)] = std::cos(static_cast<double>(t) * w);
  }
  return Tensor({dim}, std::move(v));
}

double sgd_minibatch(NamedTensors& params, const std::vector<int64_t>& batch, double lr,
                     const std::function<Tensor(const NamedTensors& watched, int64_t sample)>& loss_fn) {
  if (batch.empty()) throw std::invalid_argument("sgd_minibatch: empty batch");
  std::vector<std::vector<double>> accum(params.size());
  double loss_sum = 0.0;
  for (const int64_t sample : batch) {
    Tape tape;
    Tape::Scope scope(tape);
    const NamedTensors watched = params.watch_all(tape);
    const Tensor loss = loss_fn(watched, sample);
    loss_sum += loss.value();
    const Gradients grads = tape.backward(loss);
    for (size_t i = 0; i < params.size(); ++i) {
      const Tensor g = grads.grad(watched.items()[i].second);
      std::vector<double>& a = accum[i];
      if (a.empty()) a.assign(static_cast<size_t>(g.numel()), 0.0);
      for (int64_t j = 0; j < g.numel(); ++j) a[static_cast<size_t>(j)] += g[j];
    }
  }
  const double scale = lr / static_cast<double>(batch.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params.items()[i];
    std::vector<double> next = p.values();
    const std::vector<double>& a = accum[i];
    for (size_t j = 0; j < next.size(); ++j) next[j] -= scale * a[j];
    params.set(name, Tensor(p.shape(), std::move(next)));
  }
  return loss_sum / static_cast<double>(batch.size());
}

}  // namespace editlab
