#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gcrn/rng.hpp"

namespace gcrn {

/// Dense row-major matrix of doubles. The single dense container used for
/// graph signals (n x d), weight matrices, biases (1 x d) and peepholes.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix filled(std::size_t rows, std::size_t cols, double value);

    /// Entries drawn uniformly from [-a, a].
    static Matrix uniform(std::size_t rows, std::size_t cols, double a, Rng& rng);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// C = A * B. Accumulation over the inner index in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// C = A^T * B.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// C = A * B^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// y += s * x (elementwise).
void axpy(Matrix& y, double s, const Matrix& x);

/// Elementwise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Adds a 1 x cols row vector to every row of a.
void add_row_broadcast(Matrix& a, const Matrix& row);

/// Sums the rows of a into a 1 x cols vector.
Matrix column_sums(const Matrix& a);

/// Maximum |a_ij - b_ij|.
double max_abs_diff(const Matrix& a, const Matrix& b);

double max_abs(const Matrix& a);

}  // namespace gcrn
