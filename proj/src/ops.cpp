#include "editlab/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "kernels.hpp"

namespace editlab {

namespace {

enum class BinKind { Equal, AScalar, BScalar };

BinKind bin_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return BinKind::Equal;
  if (a.numel() == 1) return BinKind::AScalar;
  if (b.numel() == 1) return BinKind::BScalar;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

template <class F>
Tensor binary_op(const char* name, OpKind kind, const Tensor& a, const Tensor& b, F f) {
  const BinKind bk = bin_kind(name, a, b);
  const Tensor& big = (bk == BinKind::AScalar) ? b : a;
  std::vector<double> out(static_cast<size_t>(big.numel()));
  const int64_t n = big.numel();
  switch (bk) {
    case BinKind::Equal:
      for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
      break;
    case BinKind::AScalar: {
      const double av = a[0];
      for (int64_t i = 0; i < n; ++i) out[i] = f(av, b[i]);
      break;
    }
    case BinKind::BScalar: {
      const double bv = b[0];
      for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], bv);
      break;
    }
  }
  return Tape::record(kind, {a, b}, Tensor(big.shape(), std::move(out)));
}

template <class F>
Tensor unary_op(OpKind kind, const Tensor& x, F f, NodeAux aux = {}) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return Tape::record(kind, {x}, Tensor(x.shape(), std::move(out)), std::move(aux));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", OpKind::Add, a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", OpKind::Sub, a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", OpKind::Mul, a, b, [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (int64_t i = 0; i < b.numel(); ++i) {
    if (b[i] == 0.0) throw std::invalid_argument("div: zero denominator");
  }
  return binary_op("div", OpKind::Div, a, b, [](double x, double y) { return x / y; });
}

Tensor add(const Tensor& a, double c) {
  NodeAux aux;
  aux.scalar = c;
  return unary_op(OpKind::Offset, a, [c](double v) { return v + c; }, std::move(aux));
}

Tensor sub(const Tensor& a, double c) { return add(a, -c); }

Tensor mul(const Tensor& a, double c) {
  NodeAux aux;
  aux.scalar = c;
  return unary_op(OpKind::Scale, a, [c](double v) { return v * c; }, std::move(aux));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  kern::matmul_fwd(a.data(), m, k, b.data(), n, out.data());
  return Tape::record(OpKind::Matmul, {a, b}, Tensor({m, n}, std::move(out)));
}

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  if (x.rank() != 3 || kernel.rank() != 4 || kernel.dim(1) != x.dim(0)) {
    throw std::invalid_argument("conv2d: shape mismatch " + x.shape_str() + " vs kernel " + kernel.shape_str());
  }
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel " + kernel.shape_str() + " must have odd spatial dims");
  }
  const int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int64_t co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  std::vector<double> out(static_cast<size_t>(co * h * w));
  kern::conv2d_fwd(x.data(), ci, h, w, kernel.data(), co, kh, kw, out.data());
  return Tape::record(OpKind::Conv2d, {x, kernel}, Tensor({co, h, w}, std::move(out)));
}

Tensor relu(const Tensor& x) {
  return unary_op(OpKind::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(OpKind::Tanh, x, [](double v) { return std::tanh(v); });
}

Tensor softplus(const Tensor& x) {
  return unary_op(OpKind::Softplus, x, [](double v) {
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(OpKind::Sigmoid, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor exp(const Tensor& x) {
  return unary_op(OpKind::Exp, x, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] <= 0.0) throw std::invalid_argument("log: non-positive input " + std::to_string(x[i]));
  }
  return unary_op(OpKind::Log, x, [](double v) { return std::log(v); });
}

Tensor sqrt(const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] < 0.0) throw std::invalid_argument("sqrt: negative input " + std::to_string(x[i]));
  }
  return unary_op(OpKind::Sqrt, x, [](double v) { return std::sqrt(v); });
}

Tensor square(const Tensor& x) {
  return unary_op(OpKind::Square, x, [](double v) { return v * v; });
}

Tensor clamp01(const Tensor& x) {
  return unary_op(OpKind::Clamp01, x, [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  return Tape::record(OpKind::Mean, {x}, Tensor::scalar(s / static_cast<double>(x.numel())));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  return Tape::record(OpKind::Sum, {x}, Tensor::scalar(s));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: shape mismatch " + x.shape_str() + " vs " + shape_to_string(shape));
  }
  return Tape::record(OpKind::Reshape, {x}, Tensor::alias(std::move(shape), x.storage()));
}

namespace {

Shape slice_out_shape(const Tensor& x, const std::vector<SliceRange>& r) {
  if (static_cast<int>(r.size()) != x.rank()) {
    throw std::invalid_argument("slice: expected " + std::to_string(x.rank()) + " ranges for shape " + x.shape_str());
  }
  Shape out(r.size());
  for (size_t d = 0; d < r.size(); ++d) {
    const int64_t dim = x.dim(static_cast<int>(d));
    if (r[d].step < 1 || r[d].start < 0 || r[d].stop > dim || r[d].start >= r[d].stop) {
      throw std::invalid_argument("slice: invalid range [" + std::to_string(r[d].start) + "," +
                                  std::to_string(r[d].stop) + ") step " + std::to_string(r[d].step) +
                                  " for dim " + std::to_string(dim) + " of " + x.shape_str());
    }
    out[d] = (r[d].stop - r[d].start + r[d].step - 1) / r[d].step;
  }
  return out;
}

}  // namespace

Tensor slice(const Tensor& x, const std::vector<SliceRange>& ranges) {
  Shape out_shape = slice_out_shape(x, ranges);
  const int rank = x.rank();
  std::vector<int64_t> strides(static_cast<size_t>(rank), 1);
  for (int d = rank - 2; d >= 0; --d) strides[d] = strides[d + 1] * x.dim(d + 1);
  const int64_t n = shape_numel(out_shape);
  std::vector<double> out(static_cast<size_t>(n));
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  for (int64_t i = 0; i < n; ++i) {
    int64_t src = 0;
    for (int d = 0; d < rank; ++d) src += (ranges[d].start + idx[d] * ranges[d].step) * strides[d];
    out[static_cast<size_t>(i)] = x[src];
    for (int d = rank - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  NodeAux aux;
  aux.slice = ranges;
  return Tape::record(OpKind::Slice, {x}, Tensor(std::move(out_shape), std::move(out)), std::move(aux));
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int64_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw std::invalid_argument("concat: expects rank-1 tensors, got " + p.shape_str());
    total += p.numel();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total));
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tape::record(OpKind::Concat, parts, Tensor({total}, std::move(out)));
}

Tensor avg_pool2x(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw std::invalid_argument("avg_pool2x: expects (C,H,W) with even H,W, got " + x.shape_str());
  }
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * (h / 2) * (w / 2)));
  kern::avg_pool2x_fwd(x.data(), c, h, w, out.data());
  return Tape::record(OpKind::AvgPool2x, {x}, Tensor({c, h / 2, w / 2}, std::move(out)));
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample_nearest2x: expects (C,H,W), got " + x.shape_str());
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * 4 * h * w));
  kern::upsample2x_fwd(x.data(), c, h, w, out.data());
  return Tape::record(OpKind::UpsampleNearest2x, {x}, Tensor({c, 2 * h, 2 * w}, std::move(out)));
}

namespace {
void check_channel_arg(const char* op, const Tensor& x, const Tensor& v) {
  if (x.rank() != 3 || v.rank() != 1 || v.dim(0) != x.dim(0)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + x.shape_str() + " vs " + v.shape_str());
  }
}
}  // namespace

Tensor add_channel(const Tensor& x, const Tensor& bias) {
  check_channel_arg("add_channel", x, bias);
  const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * hw));
  for (int64_t ch = 0; ch < c; ++ch) {
    const double b = bias[ch];
    for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = x[ch * hw + i] + b;
  }
  return Tape::record(OpKind::AddChannel, {x, bias}, Tensor(x.shape(), std::move(out)));
}

Tensor mul_channel(const Tensor& x, const Tensor& scale) {
  check_channel_arg("mul_channel", x, scale);
  const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * hw));
  for (int64_t ch = 0; ch < c; ++ch) {
    const double s = scale[ch];
    for (int64_t i = 0; i < hw; ++i) out[ch * hw + i] = x[ch * hw + i] * s;
  }
  return Tape::record(OpKind::MulChannel, {x, scale}, Tensor(x.shape(), std::move(out)));
}

Tensor channel_l2_normalize(const Tensor& x, double eps) {
  if (x.rank() != 3) throw std::invalid_argument("channel_l2_normalize: expects (C,H,W), got " + x.shape_str());
  if (eps <= 0.0) throw std::invalid_argument("channel_l2_normalize: eps must be positive");
  const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<double> out(static_cast<size_t>(c * hw));
  kern::channel_l2norm_fwd(x.data(), c, hw, eps, out.data());
  NodeAux aux;
  aux.scalar = eps;
  return Tape::record(OpKind::ChannelL2Norm, {x}, Tensor(x.shape(), std::move(out)), std::move(aux));
}

double check_gradient(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("check_gradient: h must be positive");
  Tensor g_auto;
  {
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor xw = tape.watch(x);
    const Tensor fx = f(xw);
    if (fx.numel() != 1) {
      throw std::invalid_argument("check_gradient: f(x) must be scalar, got shape " + fx.shape_str());
    }
    g_auto = tape.backward(fx).grad(xw);
  }
  double max_err = 0.0;
  std::vector<double> probe = x.values();
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = probe[static_cast<size_t>(i)];
    probe[static_cast<size_t>(i)] = v + h;
    const double fp = f(Tensor(x.shape(), probe)).value();
    probe[static_cast<size_t>(i)] = v - h;
    const double fm = f(Tensor(x.shape(), probe)).value();
    probe[static_cast<size_t>(i)] = v;
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(g_auto[i] - fd) / std::max(1.0, std::abs(fd));
    if (err > max_err) max_err = err;
  }
  return max_err;
}

}  // namespace editlab
