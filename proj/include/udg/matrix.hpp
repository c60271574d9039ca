#pragma once

#include <cstddef>
#include <vector>

namespace udg {

// Dense row-major matrix of doubles. All heavy math in the library runs on
// this type; sizes stay at desk scale (a few thousand rows) so everything is
// kept dense and simple.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// c = a * b. Throws DimensionError on shape mismatch. Each output row is
// accumulated in a fixed k-ascending order, so results are deterministic.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// a += b / a -= b / a *= s, elementwise.
void add_inplace(Matrix& a, const Matrix& b);
void sub_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double s);

// y += alpha * x
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

// Column-wise concatenation of equally tall blocks.
Matrix hconcat(const std::vector<Matrix>& blocks);

// Columns [col0, col0+width) of m.
Matrix slice_cols(const Matrix& m, std::size_t col0, std::size_t width);

// Rows [row0, row0+count) of m.
Matrix slice_rows(const Matrix& m, std::size_t row0, std::size_t count);

bool all_finite(const Matrix& m);

}  // namespace udg
