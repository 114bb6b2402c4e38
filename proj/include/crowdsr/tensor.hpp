#ifndef CROWDSR_TENSOR_HPP
#define CROWDSR_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace crowdsr {

using Index = Eigen::Index;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Extents of a 4-D tensor in (batch, channels, height, width) order.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index numel() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense f64 tensor, row-major with batch outermost.
///
/// A tensor carries an optional gradient buffer of identical shape. The
/// buffer is only ever written by Graph::backward for tensors that were
/// enrolled with Graph::watch.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Eigen::VectorXd data);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  Index numel() const { return shape_.numel(); }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }

  double& at(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  double at(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }
  double item() const;

  // One (n, c) slice viewed as a height x width row-major matrix.
  Eigen::Map<RowMatrixXd> plane(Index n, Index c);
  Eigen::Map<const RowMatrixXd> plane(Index n, Index c) const;

  bool has_grad() const { return grad_.has_value(); }
  const Eigen::VectorXd& grad() const;
  Eigen::VectorXd& ensure_grad();
  void zero_grad() { grad_.reset(); }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

 private:
  Shape shape_;
  Eigen::VectorXd data_;
  std::optional<Eigen::VectorXd> grad_;
};

}  // namespace crowdsr

#endif  // CROWDSR_TENSOR_HPP
