#include "pandora/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pandora {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: " + std::to_string(data_.size()) + " entries for shape " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("DenseMatrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string DenseMatrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

void require_inner(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    throw ShapeError(std::string(what) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner(a, b, "matmul");
  const std::size_t n = a.rows(), m = b.cols(), inner = a.cols();
  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data().data() + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* src = b.data().data() + k * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: row mismatch " + a.shape_string() + " and " + b.shape_string());
  }
  const std::size_t n = a.cols(), m = b.cols();
  DenseMatrix out(n, m);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.data().data() + k * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* dst = out.data().data() + i * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: column mismatch " + a.shape_string() + " and " +
                     b.shape_string());
  }
  const std::size_t n = a.rows(), m = b.rows(), inner = a.cols();
  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data().data() + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data().data() + j * inner;
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(DenseMatrix& acc, const DenseMatrix& b) {
  require_same_shape(acc, b, "add");
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += b.data()[i];
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix out = a;
  for (double& x : out.data()) x *= s;
  return out;
}

DenseMatrix hconcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("hconcat: row mismatch " + a.shape_string() + " and " + b.shape_string());
  }
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace pandora
