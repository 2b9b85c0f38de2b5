#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lorenza {

// Dense row-major matrix of doubles. A default-constructed Matrix is the
// empty 0x0 placeholder; every other shape has rows, cols >= 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Throws DimensionError on ragged rows and NumericalError on NaN/Inf.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  // this += s * other
  Matrix& add_scaled(const Matrix& other, double s);

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b, without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
// <a, b> = Tr(a^T b)
double frobenius_dot(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a) noexcept;

struct QrResult {
  Matrix q;  // m x r, orthonormal columns
  Matrix r;  // r x r, upper triangular, nonnegative diagonal
};

// Thin Householder QR of a tall matrix (m >= r). The sign of each reflector
// is normalized so the diagonal of R is nonnegative, which makes the
// factorization unique for full-rank input.
//
// Throws RankDeficiencyError with the offending column when the trailing
// part of a column falls below 1e-12 * ||Y||_F.
QrResult qr_thin(const Matrix& y);

}  // namespace lorenza
