#include "proto_ood/tensor.hpp"

#include <sstream>
#include <utility>

#include "proto_ood/errors.hpp"
#include "proto_ood/rng.hpp"

namespace proto_ood {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

namespace {

std::shared_ptr<detail::TensorNode> make_node(const Shape& shape, bool requires_grad) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = shape;
  const Index n = shape_numel(shape);
  node->values = Eigen::ArrayXd::Zero(n);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad = Eigen::ArrayXd::Zero(n);
  return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(make_node(shape, requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  Tensor t(make_node(shape, requires_grad));
  t.node_->values.setConstant(value);
  return t;
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool requires_grad) {
  const Index n = shape_numel(shape);
  if (n != static_cast<Index>(values.size())) {
    throw ShapeError("from_values: shape " + shape_to_string(shape) + " expects " +
                     std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  Tensor t(make_node(shape, requires_grad));
  for (Index i = 0; i < n; ++i) t.node_->values[i] = values[static_cast<std::size_t>(i)];
  return t;
}

Tensor Tensor::from_array(const Shape& shape, Eigen::ArrayXd values, bool requires_grad) {
  const Index n = shape_numel(shape);
  if (n != values.size()) {
    throw ShapeError("from_array: shape " + shape_to_string(shape) + " expects " +
                     std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  Tensor t(make_node(shape, requires_grad));
  t.node_->values = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::gaussian(const Shape& shape, double stddev, Rng& rng, bool requires_grad) {
  Tensor t(make_node(shape, requires_grad));
  for (Index i = 0; i < t.numel(); ++i) t.node_->values[i] = rng.next_gaussian(stddev);
  return t;
}

Index Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows: tensor is not rank-2, shape " + shape_to_string(shape()));
  return node_->shape[0];
}

Index Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols: tensor is not rank-2, shape " + shape_to_string(shape()));
  return node_->shape[1];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ShapeError("value: tensor is not a scalar, shape " + shape_to_string(shape()));
  }
  return node_->values[0];
}

double Tensor::operator()(Index r, Index c) const {
  if (rank() != 2) throw ShapeError("operator(r,c): tensor is not rank-2");
  return node_->values[r * node_->shape[1] + c];
}

Eigen::ArrayXd& Tensor::grad() {
  if (!node_->requires_grad) throw UsageError("grad: tensor does not track gradients");
  return node_->grad;
}

const Eigen::ArrayXd& Tensor::grad() const {
  if (!node_->requires_grad) throw UsageError("grad: tensor does not track gradients");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.setZero();
}

Eigen::VectorXd Tensor::to_vector() const {
  return Eigen::VectorXd(node_->values.matrix());
}

Eigen::MatrixXd Tensor::to_matrix() const {
  if (rank() != 2) throw ShapeError("to_matrix: tensor is not rank-2, shape " + shape_to_string(shape()));
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      node_->values.data(), node_->shape[0], node_->shape[1]);
}

Tensor Tensor::clone() const {
  Tensor t(make_node(node_->shape, node_->requires_grad));
  t.node_->values = node_->values;
  if (node_->requires_grad) t.node_->grad = node_->grad;
  return t;
}

Tensor Tape::make_output(const Shape& shape, bool any_input_grad) {
  const bool track = recording_ && any_input_grad;
  auto node = make_node(shape, track);
  node->origin = this;
  return Tensor(std::move(node));
}

void Tape::record(std::function<void()> step) {
  if (recording_) steps_.push_back(std::move(step));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward: undefined loss tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, shape " + shape_to_string(loss.shape()));
  }
  if (!recording_) throw UsageError("backward: tape is not recording");
  if (consumed_) throw UsageError("backward: tape already consumed");
  if (loss.node()->origin != nullptr && loss.node()->origin != this) {
    throw UsageError("backward: loss was recorded on a different tape");
  }
  consumed_ = true;
  if (loss.requires_grad()) loss.node()->grad[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

}  // namespace proto_ood
