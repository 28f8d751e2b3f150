#pragma once

#include <functional>

#include "editlab/checkpoint.hpp"
#include "editlab/ops.hpp"
#include "editlab/rng.hpp"

namespace editlab {

/// Normal(0, sqrt(2/fan_in)) initialization.
Tensor he_normal(Rng& rng, Shape shape, int64_t fan_in);
Tensor normal_tensor(Rng& rng, Shape shape, double stddev = 1.0);

/// x: (in) -> (out) through W: (in,out) plus bias (out).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

/// Row `id` of a (vocab, dim) table as a rank-1 tensor.
Tensor embedding_row(const Tensor& table, int64_t id);

/// (C,H,W) -> (C) by repeated 2x average pooling; H == W, power of two.
Tensor global_mean_pool(const Tensor& x);

/// Sinusoidal embedding of an integer timestep, dim even.
Tensor time_embedding(int64_t t, int64_t dim);

/// Runs one SGD minibatch: per-sample losses from loss_fn on watched
/// parameters, gradients accumulated and applied as
/// p -= lr * mean(per-sample grads). Returns the mean sample loss.
double sgd_minibatch(NamedTensors& params, const std::vector<int64_t>& batch, double lr,
                     const std::function<Tensor(const NamedTensors& watched, int64_t sample)>& loss_fn);

}  // namespace editlab
