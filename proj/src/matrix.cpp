#include "udg/matrix.hpp"

#include <cmath>

#include "udg/errors.hpp"

namespace udg {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p);
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
}

void sub_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("sub_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] -= b.data()[i];
}

void scale_inplace(Matrix& a, double s) {
  for (auto& x : a.data()) x *= s;
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
  if (!y.same_shape(x)) throw DimensionError("axpy_inplace: shape mismatch");
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    y.data()[i] += alpha * x.data()[i];
  }
}

Matrix hconcat(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t n = blocks.front().rows();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.rows() != n) throw DimensionError("hconcat: row count mismatch");
    total += b.cols();
  }
  Matrix out(n, total);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row(i);
    std::size_t off = 0;
    for (const auto& b : blocks) {
      const double* brow = b.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[off + j] = brow[j];
      off += b.cols();
    }
  }
  return out;
}

Matrix slice_cols(const Matrix& m, std::size_t col0, std::size_t width) {
  if (col0 + width > m.cols()) {
    throw DimensionError("slice_cols: out of range");
  }
  Matrix out(m.rows(), width);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* src = m.row(i) + col0;
    double* dst = out.row(i);
    for (std::size_t j = 0; j < width; ++j) dst[j] = src[j];
  }
  return out;
}

Matrix slice_rows(const Matrix& m, std::size_t row0, std::size_t count) {
  if (row0 + count > m.rows()) {
    throw DimensionError("slice_rows: out of range");
  }
  Matrix out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const double* src = m.row(row0 + i);
    double* dst = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

bool all_finite(const Matrix& m) {
  for (double x : m.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace udg
