#include "gcl/finite_diff.hpp"

#include <cmath>
#include <string>

namespace gcl {

Tensor1 finite_diff_grad(const std::function<double(const Tensor1&)>& f, const Tensor1& x,
                         double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step h must be > 0");
  Tensor1 grad(x.len());
  Tensor1 probe = x;
  for (int i = 0; i < x.len(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DomainError("finite_diff_grad: non-finite evaluation at coordinate " +
                        std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace gcl
