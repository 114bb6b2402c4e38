#include "crowdsr/tensor.hpp"

#include <sstream>

#include "crowdsr/errors.hpp"

namespace crowdsr {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << n << "," << c << "," << h << "," << w << "]";
  return os.str();
}

namespace {
void check_extents(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor extent in shape " + s.str());
  }
}
}  // namespace

Tensor::Tensor(Shape shape) : shape_(shape) {
  check_extents(shape);
  data_ = Eigen::VectorXd::Zero(shape.numel());
}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(shape), data_(std::move(data)) {
  check_extents(shape);
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values) : shape_(shape) {
  check_extents(shape);
  if (static_cast<Index>(values.size()) != shape.numel()) {
    throw ShapeError("initializer length " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  data_.resize(shape.numel());
  Index i = 0;
  for (double v : values) data_[i++] = v;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(shape);
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) { return full({1, 1, 1, 1}, value); }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

Eigen::Map<RowMatrixXd> Tensor::plane(Index n, Index c) {
  return {data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w};
}

Eigen::Map<const RowMatrixXd> Tensor::plane(Index n, Index c) const {
  return {data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w};
}

const Eigen::VectorXd& Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient");
  return *grad_;
}

Eigen::VectorXd& Tensor::ensure_grad() {
  if (!grad_) grad_ = Eigen::VectorXd::Zero(numel());
  return *grad_;
}

}  // namespace crowdsr
