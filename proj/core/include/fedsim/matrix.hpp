#pragma once

#include <cstddef>
#include <vector>

namespace fedsim {

// Dense row-major matrix of doubles. Just enough linear algebra for a
// desk-scale classifier; no view machinery.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
};

// out(m x n) += a(m x k) * b(k x n)
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

// out(m x n) += a(k x m)^T * b(k x n)
void matmul_at_b_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

// out(m x k) += a(m x n) * b(k x n)^T
void matmul_a_bt_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace fedsim
