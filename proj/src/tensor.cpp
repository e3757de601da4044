#include "gcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gcl {

Tensor2::Tensor2(int r, int c, double fill) : rows(r), cols(c) {
  if (r < 0 || c < 0) {
    throw ShapeError("Tensor2: negative dimensions " + std::to_string(r) + "x" + std::to_string(c));
  }
  data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill);
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_finite(const Tensor1& t, const char* what) {
  if (!all_finite(t.data)) throw DomainError(std::string(what) + ": non-finite entry");
}

void require_finite(const Tensor2& t, const char* what) {
  if (!all_finite(t.data)) throw DomainError(std::string(what) + ": non-finite entry");
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
  }
  Tensor2 out(a.rows, b.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* orow = out.data.data() + static_cast<std::size_t>(i) * out.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor1 softmax(const Tensor1& z) {
  require_finite(z, "softmax input");
  const int n = z.len();
  Tensor1 out(n);
  double m = z[0];
  for (int i = 1; i < n; ++i) m = std::max(m, z[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
  return out;
}

Tensor2 softmax_rows(const Tensor2& z) {
  Tensor2 out(z.rows, z.cols);
  for (int i = 0; i < z.rows; ++i) {
    auto in = z.row(i);
    auto o = out.row(i);
    double m = in[0];
    for (int j = 1; j < z.cols; ++j) m = std::max(m, in[j]);
    double sum = 0.0;
    for (int j = 0; j < z.cols; ++j) {
      o[j] = std::exp(in[j] - m);
      sum += o[j];
    }
    for (int j = 0; j < z.cols; ++j) o[j] /= sum;
  }
  return out;
}

}  // namespace gcl
