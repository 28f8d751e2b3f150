#include "editlab/tape.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "kernels.hpp"

namespace editlab {

namespace {
thread_local Tape* g_active = nullptr;
std::atomic<uint64_t> g_epoch{1};
}  // namespace

Tape::Tape() : epoch_(g_epoch.fetch_add(1)) {}

Tape::~Tape() = default;

Tape* Tape::active() { return g_active; }

Tape::Scope::Scope(Tape& t) : prev_(g_active) { g_active = &t; }
Tape::Scope::~Scope() { g_active = prev_; }

Tensor Tape::watch(const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("watch: undefined tensor");
  Tensor traced = x;
  traced.node_ = static_cast<int32_t>(nodes_.size());
  traced.epoch_ = epoch_;
  TapeNode node;
  node.op = OpKind::Leaf;
  node.value = traced;
  nodes_.push_back(std::move(node));
  return traced;
}

Tensor Tape::record(OpKind op, std::vector<Tensor> inputs, Tensor value, NodeAux aux) {
  Tape* tape = g_active;
  if (!tape) return value;
  std::vector<int32_t> ids(inputs.size(), -1);
  bool any = false;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].epoch_ == tape->epoch_ && inputs[i].node_ >= 0) {
      ids[i] = inputs[i].node_;
      any = true;
    }
  }
  if (!any) return value;
  value.node_ = static_cast<int32_t>(tape->nodes_.size());
  value.epoch_ = tape->epoch_;
  TapeNode node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.input_ids = std::move(ids);
  node.value = value;
  node.aux = std::move(aux);
  tape->nodes_.push_back(std::move(node));
  return value;
}

Gradients Tape::backward(const Tensor& root) const {
  if (root.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " + root.shape_str());
  }
  if (root.epoch_ != epoch_ || root.node_ < 0) {
    throw std::invalid_argument("backward: root is not traced on this tape");
  }
  const size_t n = nodes_.size();
  std::vector<std::vector<double>> bufs(n);
  std::vector<char> touched(n, 0);

  auto ensure = [&](int32_t id) -> std::vector<double>& {
    std::vector<double>& b = bufs[static_cast<size_t>(id)];
    if (!touched[static_cast<size_t>(id)]) {
      b.assign(static_cast<size_t>(nodes_[static_cast<size_t>(id)].value.numel()), 0.0);
      touched[static_cast<size_t>(id)] = 1;
    }
    return b;
  };

  // Adds a contribution of the output's size into input slot k, reducing to
  // a scalar when that input was broadcast.
  auto accumulate = [&](const TapeNode& node, size_t k, const std::vector<double>& contrib) {
    const int32_t id = node.input_ids[k];
    if (id < 0) return;
    std::vector<double>& b = ensure(id);
    if (b.size() == contrib.size()) {
      for (size_t i = 0; i < contrib.size(); ++i) b[i] += contrib[i];
    } else {
      double s = 0.0;
      for (double v : contrib) s += v;
      b[0] += s;
    }
  };

  ensure(root.node_)[0] = 1.0;

  for (size_t pos = n; pos-- > 0;) {
    if (!touched[pos]) continue;
    const TapeNode& node = nodes_[pos];
    if (node.op == OpKind::Leaf) continue;
    const std::vector<double>& g = bufs[pos];
    const int64_t gn = static_cast<int64_t>(g.size());
    auto oval = [](const Tensor& t, int64_t i) { return t.numel() == 1 ? t[0] : t[i]; };

    switch (node.op) {
      case OpKind::Leaf:
        break;
      case OpKind::Add:
        accumulate(node, 0, g);
        accumulate(node, 1, g);
        break;
      case OpKind::Sub: {
        accumulate(node, 0, g);
        std::vector<double> neg(g.size());
        for (size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
        accumulate(node, 1, neg);
        break;
      }
      case OpKind::Mul: {
        const Tensor& a = node.inputs[0];
        const Tensor& b = node.inputs[1];
        if (node.input_ids[0] >= 0) {
          std::vector<double> da(g.size());
          for (int64_t i = 0; i < gn; ++i) da[i] = g[i] * oval(b, i);
          accumulate(node, 0, da);
        }
        if (node.input_ids[1] >= 0) {
          std::vector<double> db(g.size());
          for (int64_t i = 0; i < gn; ++i) db[i] = g[i] * oval(a, i);
          accumulate(node, 1, db);
        }
        break;
      }
      case OpKind::Div: {
        const Tensor& a = node.inputs[0];
        const Tensor& b = node.inputs[1];
        if (node.input_ids[0] >= 0) {
          std::vector<double> da(g.size());
          for (int64_t i = 0; i < gn; ++i) da[i] = g[i] / oval(b, i);
          accumulate(node, 0, da);
        }
        if (node.input_ids[1] >= 0) {
          std::vector<double> db(g.size());
          for (int64_t i = 0; i < gn; ++i) {
            const double bv = oval(b, i);
            db[i] = -g[i] * oval(a, i) / (bv * bv);
          }
          accumulate(node, 1, db);
        }
        break;
      }
      case OpKind::Scale: {
        std::vector<double> da(g.size());
        for (size_t i = 0; i < g.size(); ++i) da[i] = g[i] * node.aux.scalar;
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Offset:
        accumulate(node, 0, g);
        break;
      case OpKind::Matmul: {
        const Tensor& a = node.inputs[0];
        const Tensor& b = node.inputs[1];
        const int64_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
        if (node.input_ids[0] >= 0) kern::matmul_bwd_a(g.data(), m, nn, b.data(), k, ensure(node.input_ids[0]).data());
        if (node.input_ids[1] >= 0) kern::matmul_bwd_b(a.data(), m, k, g.data(), nn, ensure(node.input_ids[1]).data());
        break;
      }
      case OpKind::Conv2d: {
        const Tensor& x = node.inputs[0];
        const Tensor& kr = node.inputs[1];
        const int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
        const int64_t co = kr.dim(0), kh = kr.dim(2), kw = kr.dim(3);
        if (node.input_ids[0] >= 0) {
          kern::conv2d_bwd_input(kr.data(), co, ci, kh, kw, g.data(), h, w, ensure(node.input_ids[0]).data());
        }
        if (node.input_ids[1] >= 0) {
          kern::conv2d_bwd_kernel(x.data(), ci, h, w, g.data(), co, kh, kw, ensure(node.input_ids[1]).data());
        }
        break;
      }
      case OpKind::Relu: {
        const Tensor& x = node.inputs[0];
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = x[i] > 0.0 ? g[i] : 0.0;
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Tanh: {
        const Tensor& y = node.value;
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] * (1.0 - y[i] * y[i]);
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Softplus: {
        const Tensor& x = node.inputs[0];
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] / (1.0 + std::exp(-x[i]));
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Sigmoid: {
        const Tensor& y = node.value;
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] * y[i] * (1.0 - y[i]);
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Exp: {
        const Tensor& y = node.value;
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] * y[i];
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Log: {
        const Tensor& x = node.inputs[0];
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] / x[i];
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Sqrt: {
        const Tensor& y = node.value;
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = g[i] / (2.0 * y[i]);
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Square: {
        const Tensor& x = node.inputs[0];
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = 2.0 * g[i] * x[i];
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Clamp01: {
        const Tensor& x = node.inputs[0];
        std::vector<double> da(g.size());
        for (int64_t i = 0; i < gn; ++i) da[i] = (x[i] >= 0.0 && x[i] <= 1.0) ? g[i] : 0.0;
        accumulate(node, 0, da);
        break;
      }
      case OpKind::Mean: {
        const Tensor& x = node.inputs[0];
        const double gv = g[0] / static_cast<double>(x.numel());
        std::vector<double>& b = ensure(node.input_ids[0]);
        for (double& v : b) v += gv;
        break;
      }
      case OpKind::Sum: {
        const double gv = g[0];
        std::vector<double>& b = ensure(node.input_ids[0]);
        for (double& v : b) v += gv;
        break;
      }
      case OpKind::Reshape:
        accumulate(node, 0, g);
        break;
      case OpKind::Slice: {
        const Tensor& x = node.inputs[0];
        const auto& ranges = node.aux.slice;
        const int rank = x.rank();
        std::vector<int64_t> strides(static_cast<size_t>(rank), 1);
        for (int d = rank - 2; d >= 0; --d) strides[d] = strides[d + 1] * x.dim(d + 1);
        const Shape& os = node.value.shape();
        std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
        std::vector<double>& b = ensure(node.input_ids[0]);
        for (int64_t i = 0; i < gn; ++i) {
          int64_t src = 0;
          for (int d = 0; d < rank; ++d) src += (ranges[d].start + idx[d] * ranges[d].step) * strides[d];
          b[static_cast<size_t>(src)] += g[static_cast<size_t>(i)];
          for (int d = rank - 1; d >= 0; --d) {
            if (++idx[d] < os[d]) break;
            idx[d] = 0;
          }
        }
        break;
      }
      case OpKind::Concat: {
        int64_t off = 0;
        for (size_t k = 0; k < node.inputs.size(); ++k) {
          const int64_t len = node.inputs[k].numel();
          if (node.input_ids[k] >= 0) {
            std::vector<double>& b = ensure(node.input_ids[k]);
            for (int64_t i = 0; i < len; ++i) b[static_cast<size_t>(i)] += g[static_cast<size_t>(off + i)];
          }
          off += len;
        }
        break;
      }
      case OpKind::AvgPool2x: {
        const Tensor& x = node.inputs[0];
        kern::avg_pool2x_bwd(g.data(), x.dim(0), x.dim(1), x.dim(2), ensure(node.input_ids[0]).data());
        break;
      }
      case OpKind::UpsampleNearest2x: {
        const Tensor& x = node.inputs[0];
        kern::upsample2x_bwd(g.data(), x.dim(0), x.dim(1), x.dim(2), ensure(node.input_ids[0]).data());
        break;
      }
      case OpKind::AddChannel: {
        const Tensor& x = node.inputs[0];
        const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
        accumulate(node, 0, g);
        if (node.input_ids[1] >= 0) {
          std::vector<double>& b = ensure(node.input_ids[1]);
          for (int64_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int64_t i = 0; i < hw; ++i) s += g[static_cast<size_t>(ch * hw + i)];
            b[static_cast<size_t>(ch)] += s;
          }
        }
        break;
      }
      case OpKind::MulChannel: {
        const Tensor& x = node.inputs[0];
        const Tensor& s = node.inputs[1];
        const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
        if (node.input_ids[0] >= 0) {
          std::vector<double>& b = ensure(node.input_ids[0]);
          for (int64_t ch = 0; ch < c; ++ch) {
            const double sv = s[ch];
            for (int64_t i = 0; i < hw; ++i) b[static_cast<size_t>(ch * hw + i)] += g[static_cast<size_t>(ch * hw + i)] * sv;
          }
        }
        if (node.input_ids[1] >= 0) {
          std::vector<double>& b = ensure(node.input_ids[1]);
          for (int64_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int64_t i = 0; i < hw; ++i) acc += g[static_cast<size_t>(ch * hw + i)] * x[ch * hw + i];
            b[static_cast<size_t>(ch)] += acc;
          }
        }
        break;
      }
      case OpKind::ChannelL2Norm: {
        const Tensor& x = node.inputs[0];
        kern::channel_l2norm_bwd(x.data(), g.data(), x.dim(0), x.dim(1) * x.dim(2), node.aux.scalar,
                                 ensure(node.input_ids[0]).data());
        break;
      }
    }
  }

  Gradients out;
  out.epoch_ = epoch_;
  for (size_t i = 0; i < n; ++i) {
    if (nodes_[i].op != OpKind::Leaf) continue;
    const int32_t id = static_cast<int32_t>(i);
    out.leaf_shapes_[id] = nodes_[i].value.shape();
    if (touched[i]) out.by_node_[id] = Tensor(nodes_[i].value.shape(), std::move(bufs[i]));
  }
  return out;
}

bool Gradients::tracked(const Tensor& x) const {
  return x.trace_epoch() == epoch_ && leaf_shapes_.count(x.trace_node()) > 0;
}

Tensor Gradients::grad(const Tensor& x) const {
  if (x.trace_epoch() != epoch_) throw std::invalid_argument("grad: tensor does not belong to this tape");
  const auto it = leaf_shapes_.find(x.trace_node());
  if (it == leaf_shapes_.end()) throw std::invalid_argument("grad: tensor was not watched on this tape");
  const auto g = by_node_.find(x.trace_node());
  if (g != by_node_.end()) return g->second;
  return Tensor::zeros(it->second);
}

}  // namespace editlab
