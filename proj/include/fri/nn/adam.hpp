#pragma once

#include "fri/nn/tensor.hpp"

namespace fri::nn {

// Adam with bias correction; canonical defaults
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m, v;

  explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}

  void attach(const std::vector<Tensor>& params);
  void step(std::vector<Tensor>& params);
};

}  // namespace fri::nn
