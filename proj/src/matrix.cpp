#include "ivra/matrix.hpp"

#include <cmath>

namespace ivra {

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {
  if (rows == 0 || cols == 0) {
    throw ValueError("Matrix2D dimensions must be >= 1, got " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows == 0 || cols == 0) {
    throw ValueError("Matrix2D dimensions must be >= 1, got " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix2D data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

std::string Matrix2D::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

LayerNormParams LayerNormParams::identity(std::size_t dim) {
  LayerNormParams p;
  p.gamma.assign(dim, 1.0f);
  p.beta.assign(dim, 0.0f);
  return p;
}

Matrix2D slice_rows(const Matrix2D& m, std::size_t r0, std::size_t r1) {
  if (r0 >= r1 || r1 > m.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") invalid for " + m.shape_str());
  }
  Matrix2D out(r1 - r0, m.cols());
  std::memcpy(out.data(), m.row(r0), out.size() * sizeof(float));
  return out;
}

Matrix2D slice_cols(const Matrix2D& m, std::size_t c0, std::size_t c1) {
  if (c0 >= c1 || c1 > m.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") invalid for " + m.shape_str());
  }
  Matrix2D out(m.rows(), c1 - c0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::memcpy(out.row(r), m.row(r) + c0, out.cols() * sizeof(float));
  }
  return out;
}

void paste_rows(Matrix2D& dst, std::size_t r0, const Matrix2D& src) {
  if (src.cols() != dst.cols() || r0 + src.rows() > dst.rows()) {
    throw DimensionError("paste_rows: " + src.shape_str() + " at row " +
                         std::to_string(r0) + " does not fit in " +
                         dst.shape_str());
  }
  std::memcpy(dst.row(r0), src.data(), src.size() * sizeof(float));
}

void paste_cols(Matrix2D& dst, std::size_t c0, const Matrix2D& src) {
  if (src.rows() != dst.rows() || c0 + src.cols() > dst.cols()) {
    throw DimensionError("paste_cols: " + src.shape_str() + " at column " +
                         std::to_string(c0) + " does not fit in " +
                         dst.shape_str());
  }
  for (std::size_t r = 0; r < src.rows(); ++r) {
    std::memcpy(dst.row(r) + c0, src.row(r), src.cols() * sizeof(float));
  }
}

bool bitwise_equal(const Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

float max_abs_diff(const Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff: shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float d = std::fabs(a.data()[i] - b.data()[i]);
    if (d > m) m = d;
  }
  return m;
}

double relative_frobenius(const Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("relative_frobenius: shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    num += d * d;
    den += static_cast<double>(b.data()[i]) * b.data()[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace ivra
