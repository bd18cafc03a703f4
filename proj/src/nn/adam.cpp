#include "fri/nn/adam.hpp"

#include <cmath>

#include "fri/errors.hpp"

namespace fri::nn {

void AdamState::attach(const std::vector<Tensor>& params) {
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.size(), 0.0);
    v.emplace_back(p.size(), 0.0);
  }
  step_count = 0;
}

void AdamState::step(std::vector<Tensor>& params) {
  if (m.size() != params.size()) throw ConfigError("AdamState: attach() before step()");
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, double(step_count));
  const double bc2 = 1.0 - std::pow(beta2, double(step_count));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    if (p.grad().size() != p.size()) p.zero_grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad()[i];
      m[pi][i] = beta1 * m[pi][i] + (1.0 - beta1) * g;
      v[pi][i] = beta2 * v[pi][i] + (1.0 - beta2) * g * g;
      const double mhat = m[pi][i] / bc1;
      const double vhat = v[pi][i] / bc2;
      p.values()[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
    }
  }
}

}  // namespace fri::nn
