#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace heloc {

/// Dense row-major matrix of doubles. Vectors are stored as 1×n rows.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 identity(std::size_t n);
  static Tensor2 row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Tensor2& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double value);
  Tensor2& operator+=(const Tensor2& other);
  Tensor2& operator*=(double s);

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2 operator+(Tensor2 a, const Tensor2& b);
Tensor2 operator-(Tensor2 a, const Tensor2& b);
Tensor2 operator*(Tensor2 a, double s);

Tensor2 transpose(const Tensor2& a);
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// a · bᵀ without materializing the transpose.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
/// aᵀ · b without materializing the transpose.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);

Tensor2 relu(const Tensor2& x);
/// Row-wise softmax with per-row max subtraction.
Tensor2 softmax_rows(const Tensor2& x);
/// Per-row standardization followed by gain ∘ x̂ + bias. gain and bias are 1×cols.
Tensor2 layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps);

double sum(const Tensor2& x);
double max_abs(const Tensor2& x);
bool all_finite(const Tensor2& x);

}  // namespace heloc

namespace heloc {

/// Compressed sparse row matrix used for fixed propagation operators.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_start;  // length rows + 1
  std::vector<std::size_t> col_index;
  std::vector<double> values;

  static CsrMatrix from_dense(const Tensor2& dense);
  Tensor2 to_dense() const;
};

/// s · x for sparse s.
Tensor2 spmm(const CsrMatrix& s, const Tensor2& x);
/// sᵀ · x for sparse s.
Tensor2 spmm_t(const CsrMatrix& s, const Tensor2& x);

}  // namespace heloc
