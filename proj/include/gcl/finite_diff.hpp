#pragma once

#include <functional>

#include "gcl/tensor.hpp"

namespace gcl {

// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
// Independent oracle for every analytic backward pass in this codebase.
Tensor1 finite_diff_grad(const std::function<double(const Tensor1&)>& f, const Tensor1& x,
                         double h);

}  // namespace gcl
