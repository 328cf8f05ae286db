#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace proto_ood {

using Index = std::int64_t;
using Shape = std::vector<Index>;

class Tape;

namespace detail {

struct TensorNode {
  Shape shape;
  Eigen::ArrayXd values;  // row-major flattening of `shape`
  Eigen::ArrayXd grad;    // same length as values iff requires_grad
  bool requires_grad = false;
  const Tape* origin = nullptr;  // tape that produced this node, null for leaves
};

}  // namespace detail

std::string shape_to_string(const Shape& shape);
Index shape_numel(const Shape& shape);

// Dense 64-bit float tensor. Handle semantics: copies share the same storage
// node, so a parameter held by a model and by an optimizer is one buffer.
// Values are immutable by convention once an op has produced them; grad
// buffers accumulate during Tape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_values(const Shape& shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor from_array(const Shape& shape, Eigen::ArrayXd values,
                           bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor gaussian(const Shape& shape, double stddev, class Rng& rng,
                         bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index numel() const { return node_->values.size(); }
  Index rows() const;
  Index cols() const;
  bool requires_grad() const { return node_->requires_grad; }

  // Scalar convenience; throws ShapeError unless numel() == 1.
  double value() const;

  double operator()(Index i) const { return node_->values[i]; }
  double operator()(Index r, Index c) const;

  Eigen::ArrayXd& values() { return node_->values; }
  const Eigen::ArrayXd& values() const { return node_->values; }

  // Throws UsageError when the tensor does not track gradients.
  Eigen::ArrayXd& grad();
  const Eigen::ArrayXd& grad() const;
  void zero_grad();

  // Dense copies for the non-differentiating modules (scoring, metrics).
  Eigen::VectorXd to_vector() const;
  Eigen::MatrixXd to_matrix() const;  // rank-2 only

  // Deep copy with fresh storage (used for checkpoints/snapshots).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend class Tape;
};

// Reverse-mode tape. Operations append their backward rule as they execute,
// so the node order is topological by construction and backward() replays it
// exactly once in reverse. A tape serves one forward pass and is consumed by
// backward(); tensors and the tape that recorded them are confined to one
// thread, but independent tapes may run concurrently.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return steps_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad ancestor. Single use.
  void backward(const Tensor& loss);

  // Internal: used by ops to register output nodes and backward rules.
  Tensor make_output(const Shape& shape, bool any_input_grad);
  void record(std::function<void()> step);

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace proto_ood
