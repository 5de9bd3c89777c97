#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace freqdyn::linalg {

/// Dense row-major matrix of doubles or complex doubles. Network sizes here
/// are a few dozen buses, so dense factorization is the right tool.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  void fill(T v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
double magnitude(const T& v) {
  if constexpr (std::is_same_v<T, std::complex<double>>)
    return std::abs(v);
  else
    return std::fabs(v);
}

/// LU factorization with partial pivoting; solves in place.
template <typename T>
class Lu {
 public:
  explicit Lu(Matrix<T> a) : a_(std::move(a)), piv_(a_.rows()) {
    const std::size_t n = a_.rows();
    if (a_.cols() != n) throw std::invalid_argument("Lu: matrix must be square");
    for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = magnitude(a_(k, k));
      for (std::size_t r = k + 1; r < n; ++r) {
        const double m = magnitude(a_(r, k));
        if (m > best) { best = m; p = r; }
      }
      if (best < 1e-300) { singular_ = true; return; }
      if (p != k) {
        std::swap(piv_[p], piv_[k]);
        for (std::size_t c = 0; c < n; ++c) std::swap(a_(p, c), a_(k, c));
      }
      for (std::size_t r = k + 1; r < n; ++r) {
        const T f = a_(r, k) / a_(k, k);
        a_(r, k) = f;
        for (std::size_t c = k + 1; c < n; ++c) a_(r, c) -= f * a_(k, c);
      }
    }
  }

  bool singular() const { return singular_; }

  std::vector<T> solve(const std::vector<T>& b) const {
    if (singular_) throw std::runtime_error("Lu::solve: singular matrix");
    const std::size_t n = a_.rows();
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[piv_[i]];
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= a_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= a_(i, j) * x[j];
      x[i] /= a_(i, i);
    }
    return x;
  }

 private:
  Matrix<T> a_;
  std::vector<std::size_t> piv_;
  bool singular_ = false;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<std::complex<double>>;

}  // namespace freqdyn::linalg
