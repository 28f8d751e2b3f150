#include "editlab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace editlab {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d <= 0) throw std::invalid_argument("tensor shape " + shape_to_string(s) + " has a non-positive dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("tensor shape " + shape_to_string(shape) + " expects " + std::to_string(n) +
                                " values, got " + std::to_string(values.size()));
  }
  shape_ = std::move(shape);
  numel_ = n;
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  const int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  const int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::alias(Shape shape, std::shared_ptr<const std::vector<double>> data) {
  const int64_t n = shape_numel(shape);
  if (!data || n != static_cast<int64_t>(data->size())) {
    throw std::invalid_argument("tensor alias: storage does not match shape " + shape_to_string(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = n;
  t.data_ = std::move(data);
  return t;
}

double Tensor::value() const {
  if (numel_ != 1) throw std::invalid_argument("value(): tensor of shape " + shape_str() + " is not scalar");
  return (*data_)[0];
}

bool Tensor::all_finite() const {
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace editlab
