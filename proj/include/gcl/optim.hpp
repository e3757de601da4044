#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gcl {

// Classic SGD momentum state: one velocity buffer per parameter tensor.
// v <- momentum * v + g;  p <- p - lr * v
struct SgdState {
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<std::vector<double>> velocity;

  SgdState(double lr_, double momentum_, const std::vector<std::size_t>& shapes);
};

void sgd_step(std::span<double> param, std::span<const double> grad,
              std::vector<double>& velocity, double lr, double momentum);

void sgd_step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads, SgdState& state);

}  // namespace gcl
