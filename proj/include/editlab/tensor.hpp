#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace editlab {

using Shape = std::vector<int64_t>;

std::string shape_to_string(const Shape& s);

/// Product of all dimensions. Throws if any dimension is not positive.
int64_t shape_numel(const Shape& s);

/// Dense N-dimensional array of 64-bit floats, row-major.
/// Immutable after construction; copies share storage. A tensor may carry a
/// link to the tape node that produced it (see Tape); the link never affects
/// the value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  /// Reinterprets shared storage under a new shape (no copy).
  static Tensor alias(Shape shape, std::shared_ptr<const std::vector<double>> data);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return numel_; }

  const std::vector<double>& values() const { return *data_; }
  std::shared_ptr<const std::vector<double>> storage() const { return data_; }
  const double* data() const { return data_->data(); }
  double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

  template <class... I>
  double operator()(I... idx) const {
    const int64_t ids[] = {static_cast<int64_t>(idx)...};
    int64_t flat = 0;
    for (size_t d = 0; d < sizeof...(I); ++d) flat = flat * shape_[d] + ids[d];
    return (*data_)[static_cast<size_t>(flat)];
  }

  /// Sole element of a one-element tensor.
  double value() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  std::string shape_str() const { return shape_to_string(shape_); }

  int32_t trace_node() const { return node_; }
  uint64_t trace_epoch() const { return epoch_; }

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  int64_t numel_ = 0;
  int32_t node_ = -1;    // index into the producing tape, -1 if untraced
  uint64_t epoch_ = 0;   // identity of the producing tape, 0 if untraced
};

}  // namespace editlab
