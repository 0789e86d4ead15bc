#include "crimegat/matrix.hpp"

#include <cmath>
#include <limits>

#include "crimegat/errors.hpp"

namespace crimegat {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw ContractError("Matrix::from_rows: ragged row lengths");
    }
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

void Matrix::fill(double value) {
  for (double& v : data_) v = value;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: dimension mismatch " + a.shape_str() + " * " +
                        b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto brow = b.row(k);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  ensure_finite(out, "matmul result");
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix leaky_relu(const Matrix& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ContractError("leaky_relu: slope must be in (0, 1)");
  }
  ensure_finite(x, "leaky_relu input");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = v >= 0.0 ? v : slope * v;
  }
  return out;
}

Matrix leaky_relu_grad(const Matrix& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ContractError("leaky_relu_grad: slope must be in (0, 1)");
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    out.data()[i] = x.data()[i] > 0.0 ? 1.0 : slope;
  }
  return out;
}

std::vector<double> segment_softmax(std::span<const double> logits,
                                    std::span<const std::size_t> segment_ids) {
  if (logits.size() != segment_ids.size()) {
    throw ContractError("segment_softmax: logits and segment ids differ in length");
  }
  std::vector<double> out(logits.size());
  std::size_t begin = 0;
  while (begin < logits.size()) {
    if (begin > 0 && segment_ids[begin] < segment_ids[begin - 1]) {
      throw ContractError("segment_softmax: segment ids are not grouped contiguously");
    }
    std::size_t end = begin + 1;
    while (end < logits.size() && segment_ids[end] == segment_ids[begin]) ++end;
    double mx = logits[begin];
    for (std::size_t k = begin + 1; k < end; ++k) mx = std::max(mx, logits[k]);
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      out[k] = std::exp(logits[k] - mx);
      sum += out[k];
    }
    for (std::size_t k = begin; k < end; ++k) out[k] /= sum;
    begin = end;
  }
  return out;
}

double sigmoid(double x) {
  if (!std::isfinite(x)) throw NumericError("sigmoid: non-finite input");
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void add_in_place(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ContractError("add_in_place: shape mismatch " + a.shape_str() + " vs " +
                        b.shape_str());
  }
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
}

void scale_in_place(Matrix& a, double s) {
  for (double& v : a.data()) v *= s;
}

void ensure_finite(const Matrix& m, const std::string& what) {
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    if (!std::isfinite(m.data()[i])) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace crimegat
