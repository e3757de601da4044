#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "gcl/errors.hpp"

namespace gcl {

// Dense 1-D array of 64-bit floats.
struct Tensor1 {
  std::vector<double> data;

  Tensor1() = default;
  explicit Tensor1(int n, double fill = 0.0) : data(static_cast<std::size_t>(n), fill) {}
  Tensor1(std::initializer_list<double> v) : data(v) {}

  int len() const { return static_cast<int>(data.size()); }
  double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

  auto begin() { return data.begin(); }
  auto end() { return data.end(); }
  auto begin() const { return data.begin(); }
  auto end() const { return data.end(); }
};

// Dense row-major 2-D array of 64-bit floats.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0);

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::span<double> row(int i) {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
};

bool all_finite(std::span<const double> v);
void require_finite(const Tensor1& t, const char* what);
void require_finite(const Tensor2& t, const char* what);

// Standard matrix product with a fixed left-to-right summation order inside
// each dot product, so reruns are bit-identical.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);

Tensor2 transpose(const Tensor2& a);

// Numerically stable softmax (max subtraction). Output sums to 1 within 1e-12.
Tensor1 softmax(const Tensor1& z);

// Row-wise softmax over a batch of logits.
Tensor2 softmax_rows(const Tensor2& z);

}  // namespace gcl
