#ifndef BSS_TENSOR_HPP
#define BSS_TENSOR_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace bss {

using cdouble = std::complex<double>;

// Dense row-major matrix. Sized for the small per-frequency problems of this
// toolkit (channel counts around 8), but not restricted to them.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(std::size_t i) { return data_.data() + i * cols_; }
  const T* row(std::size_t i) const { return data_.data() + i * cols_; }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// Dense row-major rank-3 tensor; the toolkit indexes spectrograms as
// (frequency, frame, channel) and mask stacks as (frequency, frame, class).
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, T fill = T{})
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * d1_ + j) * d2_ + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * d1_ + j) * d2_ + k];
  }

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  // Pointer to the contiguous innermost slice (i, j, :).
  T* slice(std::size_t i, std::size_t j) {
    return data_.data() + (i * d1_ + j) * d2_;
  }
  const T* slice(std::size_t i, std::size_t j) const {
    return data_.data() + (i * d1_ + j) * d2_;
  }

  bool operator==(const Tensor3& other) const {
    return d0_ == other.d0_ && d1_ == other.d1_ && d2_ == other.d2_ &&
           data_ == other.data_;
  }

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<T> data_;
};

using CMatrix = Matrix<cdouble>;
using RMatrix = Matrix<double>;
using CVector = std::vector<cdouble>;

}  // namespace bss

#endif  // BSS_TENSOR_HPP
