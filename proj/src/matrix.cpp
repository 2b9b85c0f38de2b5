#include "lorenza/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza {

namespace {

void require_positive_shape(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    std::ostringstream os;
    os << "matrix shape must be positive, got " << rows << "x" << cols;
    throw DimensionError(os.str());
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols();
    throw DimensionError(os.str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  require_positive_shape(rows, cols);
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive_shape(rows, cols);
  if (data_.size() != rows * cols) {
    std::ostringstream os;
    os << "matrix data length " << data_.size() << " does not match " << rows << "x" << cols;
    throw DimensionError(os.str());
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("from_rows: ragged rows");
    for (double x : row) {
      if (!std::isfinite(x)) throw NumericalError("from_rows: non-finite literal");
      data.push_back(x);
    }
  }
  return Matrix(rows.size(), cols, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix Matrix::transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix& Matrix::add_scaled(const Matrix& other, double s) {
  require_same_shape(*this, other, "add_scaled");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * other.data_[k];
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < od.size(); ++k) od[k] *= bd[k];
  return out;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_dot(a, a)); }

double frobenius_dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  double acc = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < ad.size(); ++k) acc += ad[k] * bd[k];
  return acc;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(const Matrix& a) noexcept {
  return std::all_of(a.data().begin(), a.data().end(), [](double x) { return std::isfinite(x); });
}

QrResult qr_thin(const Matrix& y) {
  const std::size_t m = y.rows();
  const std::size_t r = y.cols();
  if (m == 0 || r == 0) throw DimensionError("qr_thin: empty input");
  if (m < r) throw DimensionError("qr_thin: requires rows >= cols");
  if (!all_finite(y)) throw NumericalError("qr_thin: non-finite input");

  const double tol = 1e-12 * frobenius_norm(y);
  Matrix a = y;
  // Householder vectors, v_k has support on rows k..m-1.
  std::vector<std::vector<double>> reflectors(r);
  std::vector<double> diag(r);

  for (std::size_t k = 0; k < r; ++k) {
    double norm_sq = 0.0;
    for (std::size_t i = k; i < m; ++i) norm_sq += a(i, k) * a(i, k);
    const double norm = std::sqrt(norm_sq);
    if (!(norm > tol)) {
      std::ostringstream os;
      os << "qr_thin: column " << k << " is numerically dependent (residual norm " << norm
         << ")";
      throw RankDeficiencyError(k, os.str());
    }
    const double alpha = a(k, k) >= 0.0 ? -norm : norm;
    std::vector<double>& v = reflectors[k];
    v.assign(m - k, 0.0);
    for (std::size_t i = k; i < m; ++i) v[i - k] = a(i, k);
    v[0] -= alpha;
    double v_norm_sq = 0.0;
    for (double x : v) v_norm_sq += x * x;
    // v_norm_sq > 0 whenever norm > 0 because v[0] and alpha have opposite signs.
    const double inv = 1.0 / std::sqrt(v_norm_sq);
    for (double& x : v) x *= inv;

    for (std::size_t j = k; j < r; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * a(i, j);
      s *= 2.0;
      for (std::size_t i = k; i < m; ++i) a(i, j) -= s * v[i - k];
    }
    diag[k] = alpha;
  }

  Matrix rr(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    rr(i, i) = diag[i];
    for (std::size_t j = i + 1; j < r; ++j) rr(i, j) = a(i, j);
  }

  // Q = H_0 H_1 ... H_{r-1} [I_r; 0], accumulated backwards.
  Matrix q(m, r);
  for (std::size_t j = 0; j < r; ++j) q(j, j) = 1.0;
  for (std::size_t kk = r; kk-- > 0;) {
    const std::vector<double>& v = reflectors[kk];
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += v[i - kk] * q(i, j);
      s *= 2.0;
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= s * v[i - kk];
    }
  }

  for (std::size_t k = 0; k < r; ++k) {
    if (rr(k, k) < 0.0) {
      for (std::size_t j = k; j < r; ++j) rr(k, j) = -rr(k, j);
      for (std::size_t i = 0; i < m; ++i) q(i, k) = -q(i, k);
    }
  }
  return {std::move(q), std::move(rr)};
}

}  // namespace lorenza
