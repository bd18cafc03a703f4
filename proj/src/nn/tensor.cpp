#include "fri/nn/tensor.hpp"

#include "fri/errors.hpp"

namespace fri::nn {

namespace {
std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->values.assign(shape_size(t.node_->shape), 0.0);
  t.node_->grad.assign(t.node_->values.size(), 0.0);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::size_t> shape,
                    bool requires_grad) {
  if (values.size() != shape_size(shape)) throw ConfigError("Tensor::from: shape/value mismatch");
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->values = std::move(values);
  t.node_->grad.assign(t.node_->values.size(), 0.0);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({v}, {1}, requires_grad); }

void Tape::backward(const Tensor& scalar_loss) {
  if (scalar_loss.size() != 1) throw ConfigError("Tape::backward: loss must be scalar");
  Tensor loss = scalar_loss;
  loss.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace fri::nn
