#pragma once

#include <functional>
#include <vector>

#include "editlab/tape.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

// Elementwise binary ops accept equal shapes or a one-element tensor on
// either side (scalar broadcast). No other broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double c);
Tensor sub(const Tensor& a, double c);
Tensor mul(const Tensor& a, double c);

/// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

/// x: (Ci,H,W), kernel: (Co,Ci,kh,kw), odd kh/kw, stride 1, zero padding
/// preserving the spatial size.
Tensor conv2d(const Tensor& x, const Tensor& kernel);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);       // positive inputs only
Tensor sqrt(const Tensor& x);      // non-negative inputs only
Tensor square(const Tensor& x);
Tensor clamp01(const Tensor& x);

Tensor mean(const Tensor& x);      // full reduction -> shape [1]
Tensor sum(const Tensor& x);       // full reduction -> shape [1]

Tensor reshape(const Tensor& x, Shape shape);
/// One range per dimension; half-open [start, stop) with positive step.
Tensor slice(const Tensor& x, const std::vector<SliceRange>& ranges);
/// Concatenation of rank-1 tensors.
Tensor concat(const std::vector<Tensor>& parts);

Tensor avg_pool2x(const Tensor& x);           // (C,H,W), even H and W
Tensor upsample_nearest2x(const Tensor& x);   // (C,H,W) -> (C,2H,2W)
Tensor add_channel(const Tensor& x, const Tensor& bias);   // bias: (C)
Tensor mul_channel(const Tensor& x, const Tensor& scale);  // scale: (C)
/// Divides each channel by its L2 norm over spatial positions.
Tensor channel_l2_normalize(const Tensor& x, double eps = 1e-12);

/// Max over coordinates of |g_auto - g_fd| / max(1, |g_fd|), central
/// differences with step h. f must map x to a scalar tensor.
double check_gradient(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace editlab
