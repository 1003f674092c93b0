#include "idsgp/tensor.hpp"

#include <cmath>
#include <sstream>

#include "idsgp/errors.hpp"

namespace idsgp {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.as_matrix() = m;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  }
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return Eigen::Map<const Eigen::ArrayXd>(data_.data(), Eigen::Index(data_.size())).allFinite();
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

MatrixMap Tensor::as_matrix() {
  if (rank() == 2) return {data_.data(), Eigen::Index(shape_[0]), Eigen::Index(shape_[1])};
  if (rank() <= 1) return {data_.data(), Eigen::Index(data_.size()), 1};
  throw ShapeError("as_matrix: rank-" + std::to_string(rank()) + " tensor");
}

ConstMatrixMap Tensor::as_matrix() const {
  if (rank() == 2) return {data_.data(), Eigen::Index(shape_[0]), Eigen::Index(shape_[1])};
  if (rank() <= 1) return {data_.data(), Eigen::Index(data_.size()), 1};
  throw ShapeError("as_matrix: rank-" + std::to_string(rank()) + " tensor");
}

Eigen::MatrixXd Tensor::to_eigen() const { return as_matrix(); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.data_.size() != data_.size()) {
    throw ShapeError("tensor +=: shapes " + to_string(shape_) + " and " +
                     to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

}  // namespace idsgp
