#pragma once

#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivra {

// Operand shapes do not line up. The message names both shapes.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument value is outside its domain (lambda out of [0,1], zero-norm
// patch, empty axis, ...).
class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major float32 matrix. The universal carrier: patch embeddings,
// affinity maps, pooling weights and token blocks all live in one of these.
class Matrix2D {
 public:
  // Empty placeholder (0x0), the same state a moved-from matrix is left in.
  // Every operation below requires a real matrix built by the sized
  // constructors, which reject zero dimensions.
  Matrix2D() : rows_(0), cols_(0) {}
  // Zero-filled rows x cols matrix. Both dimensions must be >= 1.
  Matrix2D(std::size_t rows, std::size_t cols);
  // Takes ownership of `values`; values.size() must equal rows * cols.
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  float* row(std::size_t r) { return data_.data() + r * cols_; }
  const float* row(std::size_t r) const { return data_.data() + r * cols_; }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool same_shape(const Matrix2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // "RxC", used by error messages.
  std::string shape_str() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> data_;
};

// Per-feature affine parameters for row-wise layer normalization.
struct LayerNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  float epsilon = 1e-5f;

  // gamma = 1, beta = 0.
  static LayerNormParams identity(std::size_t dim);
};

// Copy of rows [r0, r1).
Matrix2D slice_rows(const Matrix2D& m, std::size_t r0, std::size_t r1);

// Copy of columns [c0, c1).
Matrix2D slice_cols(const Matrix2D& m, std::size_t c0, std::size_t c1);

// Writes src over dst rows starting at r0; widths must match.
void paste_rows(Matrix2D& dst, std::size_t r0, const Matrix2D& src);

// Writes src over dst columns starting at c0; heights must match.
void paste_cols(Matrix2D& dst, std::size_t c0, const Matrix2D& src);

// Exact byte comparison of two matrices (shape and payload).
bool bitwise_equal(const Matrix2D& a, const Matrix2D& b);

// max |a - b| over all entries; shapes must match.
float max_abs_diff(const Matrix2D& a, const Matrix2D& b);

// ||a - b||_F / ||b||_F (0 when both are zero).
double relative_frobenius(const Matrix2D& a, const Matrix2D& b);

}  // namespace ivra
