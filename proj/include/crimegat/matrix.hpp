#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace crimegat {

// Dense row-major matrix of 64-bit floats. All model state and kernels use
// this type. Shapes are always checked; nothing broadcasts.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Elementwise y = x for x >= 0, slope * x otherwise. slope must lie in (0, 1).
Matrix leaky_relu(const Matrix& x, double slope);
// Derivative factors: 1 for x > 0, slope otherwise. x = 0 takes the negative
// branch so gradient checks are reproducible.
Matrix leaky_relu_grad(const Matrix& x, double slope);

// Softmax within contiguous segments. segment_ids must be non-decreasing and
// the same length as logits; the maximum is subtracted per segment before
// exponentiation.
std::vector<double> segment_softmax(std::span<const double> logits,
                                    std::span<const std::size_t> segment_ids);

// Numerically stable logistic function; sigmoid(-x) == 1 - sigmoid(x).
double sigmoid(double x);

double dot(std::span<const double> a, std::span<const double> b);
void add_in_place(Matrix& a, const Matrix& b);
void scale_in_place(Matrix& a, double s);
void ensure_finite(const Matrix& m, const std::string& what);

}  // namespace crimegat
