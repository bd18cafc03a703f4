#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace fri::nn {

// Value-semantic handle to a shared tensor node. Complex quantities are
// stored as real/imaginary pairs in a trailing dimension of size 2.
// Gradient storage is allocated (zeroed) at creation; backward passes
// accumulate into it, so parameter gradients sum naturally across a batch
// and the caller zeroes them per optimizer step.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  double value() const { return node_->values.at(0); }  // scalar convenience

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

// Ordered record of primitive applications; replaying in reverse accumulates
// gradients into every tensor reachable from the loss.
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    if (recording_) ops_.push_back(std::move(backward_fn));
  }
  void backward(const Tensor& scalar_loss);
  void reset() { ops_.clear(); }
  std::size_t op_count() const { return ops_.size(); }

  // inference-only passes skip closure bookkeeping entirely
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

 private:
  std::vector<std::function<void()>> ops_;
  bool recording_ = true;
};

}  // namespace fri::nn
