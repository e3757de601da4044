#include "gcl/optim.hpp"

#include <string>

#include "gcl/errors.hpp"

namespace gcl {

SgdState::SgdState(double lr_, double momentum_, const std::vector<std::size_t>& shapes)
    : lr(lr_), momentum(momentum_) {
  if (!(lr > 0.0)) throw DomainError("sgd: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw DomainError("sgd: momentum must be in [0, 1)");
  velocity.reserve(shapes.size());
  for (std::size_t n : shapes) velocity.emplace_back(n, 0.0);
}

void sgd_step(std::span<double> param, std::span<const double> grad,
              std::vector<double>& velocity, double lr, double momentum) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd_step: parameter/gradient/velocity sizes differ (" +
                     std::to_string(param.size()) + ", " + std::to_string(grad.size()) + ", " +
                     std::to_string(velocity.size()) + ")");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

void sgd_step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads, SgdState& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw ShapeError("sgd_step: tensor list sizes differ");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    sgd_step(params[t], grads[t], state.velocity[t], state.lr, state.momentum);
  }
}

}  // namespace gcl
