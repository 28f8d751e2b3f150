#pragma once

#include <unordered_map>
#include <vector>

#include "editlab/tensor.hpp"

namespace editlab {

enum class OpKind {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Scale,       // multiply by a compile-time constant double
  Offset,      // add a constant double
  Matmul,
  Conv2d,
  Relu,
  Tanh,
  Softplus,
  Sigmoid,
  Exp,
  Log,
  Sqrt,
  Square,
  Clamp01,
  Mean,
  Sum,
  Reshape,
  Slice,
  Concat,
  AvgPool2x,
  UpsampleNearest2x,
  AddChannel,
  MulChannel,
  ChannelL2Norm,
};

struct SliceRange {
  int64_t start = 0;
  int64_t stop = 0;
  int64_t step = 1;
};

struct NodeAux {
  double scalar = 0.0;
  std::vector<SliceRange> slice;
};

/// One recorded operation: kind, input values, input node ids (-1 for
/// untraced constants), cached forward value, op-specific extras.
struct TapeNode {
  OpKind op = OpKind::Leaf;
  std::vector<Tensor> inputs;
  std::vector<int32_t> input_ids;
  Tensor value;
  NodeAux aux;
};

class Tape;

/// Gradients for the watched leaves of one backward sweep.
class Gradients {
 public:
  /// True if x is a watched leaf of the originating tape.
  bool tracked(const Tensor& x) const;
  /// Gradient of the root w.r.t. x; zeros when no path reached x.
  Tensor grad(const Tensor& x) const;

 private:
  friend class Tape;
  uint64_t epoch_ = 0;
  std::unordered_map<int32_t, Tensor> by_node_;
  std::unordered_map<int32_t, Shape> leaf_shapes_;
};

/// Reverse-mode tape. Single-threaded; concurrent trajectories each own a
/// private tape. Ops record onto the thread's active tape (see Scope); with
/// no active tape they compute plain values, bit-identically.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers x as a differentiable leaf; returns the traced handle.
  Tensor watch(const Tensor& x);

  /// Reverse sweep from a traced scalar root. Visits each node once in
  /// reverse topological order; fan-out accumulates by summation.
  Gradients backward(const Tensor& root) const;

  size_t node_count() const { return nodes_.size(); }
  uint64_t epoch() const { return epoch_; }

  static Tape* active();

  /// Records an op on the active tape when at least one input is traced
  /// there; otherwise returns the value untouched.
  static Tensor record(OpKind op, std::vector<Tensor> inputs, Tensor value, NodeAux aux = {});

  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

 private:
  std::vector<TapeNode> nodes_;
  uint64_t epoch_;
};

}  // namespace editlab
