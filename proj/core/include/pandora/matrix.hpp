#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pandora {

/// Row-major dense matrix of doubles.
///
/// Every matrix in the pipeline (adjacency, propagation, features, weights,
/// embeddings, probabilities) is one of these. Shapes are checked at the
/// operation boundary and mismatches raise ShapeError.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  DenseMatrix transpose() const;
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Throws ShapeError naming `what` and both shapes unless a.cols() == b.rows().
void require_inner(const DenseMatrix& a, const DenseMatrix& b, const char* what);
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

// Plain i-k-j products. Each output entry accumulates over k in index order,
// so a row's value depends only on that row's inputs.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ·b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a·bᵀ without materializing the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
void add_inplace(DenseMatrix& acc, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);
DenseMatrix hconcat(const DenseMatrix& a, const DenseMatrix& b);

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace pandora
