#include "heloc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "heloc/error.hpp"

namespace heloc {
namespace {

std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Tensor2::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor2& Tensor2::operator+=(const Tensor2& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor2& Tensor2::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor2 operator+(Tensor2 a, const Tensor2& b) { return a += b; }

Tensor2 operator-(Tensor2 a, const Tensor2& b) {
  require_same_shape(a, b, "sub");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

Tensor2 operator*(Tensor2 a, double s) { return a *= s; }

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_str(a) + " · " + shape_str(b));
  Tensor2 out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape_str(a) + " · " + shape_str(b) + "ᵀ");
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: " + shape_str(a) + "ᵀ · " + shape_str(b));
  Tensor2 out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(k, i);
      if (s == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += s * brow[j];
    }
  }
  return out;
}

Tensor2 relu(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - m);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

Tensor2 layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps) {
  if (gain.size() != x.cols() || bias.size() != x.cols())
    throw ShapeError("layer_norm_rows: gain/bias length must equal " + std::to_string(x.cols()));
  Tensor2 out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c)
      o[c] = gain[c] * (in[c] - mean) * inv_std + bias[c];
  }
  return out;
}

double sum(const Tensor2& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return s;
}

double max_abs(const Tensor2& x) {
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Tensor2& x) {
  return std::all_of(x.data().begin(), x.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace heloc

namespace heloc {

CsrMatrix CsrMatrix::from_dense(const Tensor2& dense) {
  CsrMatrix m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.row_start.reserve(m.rows + 1);
  m.row_start.push_back(0);
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        m.col_index.push_back(c);
        m.values.push_back(dense(r, c));
      }
    }
    m.row_start.push_back(m.col_index.size());
  }
  return m;
}

Tensor2 CsrMatrix::to_dense() const {
  Tensor2 d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) d(r, col_index[k]) = values[k];
  return d;
}

Tensor2 spmm(const CsrMatrix& s, const Tensor2& x) {
  if (s.cols != x.rows()) throw ShapeError("spmm: operator columns do not match input rows");
  Tensor2 out(s.rows, x.cols());
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* o = out.row(r).data();
    for (std::size_t k = s.row_start[r]; k < s.row_start[r + 1]; ++k) {
      const double w = s.values[k];
      const double* in = x.row(s.col_index[k]).data();
      for (std::size_t j = 0; j < x.cols(); ++j) o[j] += w * in[j];
    }
  }
  return out;
}

Tensor2 spmm_t(const CsrMatrix& s, const Tensor2& x) {
  if (s.rows != x.rows()) throw ShapeError("spmm_t: operator rows do not match input rows");
  Tensor2 out(s.cols, x.cols());
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* in = x.row(r).data();
    for (std::size_t k = s.row_start[r]; k < s.row_start[r + 1]; ++k) {
      const double w = s.values[k];
      double* o = out.row(s.col_index[k]).data();
      for (std::size_t j = 0; j < x.cols(); ++j) o[j] += w * in[j];
    }
  }
  return out;
}

}  // namespace heloc
