#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcrn/matrix.hpp"

namespace gcrn {

/// One coordinate-format entry.
struct Coo {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Immutable CSR matrix in canonical form: within each row the column
/// indices are strictly increasing, no duplicates, no explicit zeros,
/// every stored value finite.
class SparseMatrix {
  public:
    SparseMatrix() : row_offsets_(1, 0) {}
    SparseMatrix(std::size_t n_rows, std::size_t n_cols,
                 std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const std::size_t> row_offsets() const { return row_offsets_; }
    std::span<const std::size_t> col_indices() const { return col_indices_; }
    std::span<const double> values() const { return values_; }

    /// Column indices of row i.
    std::span<const std::size_t> row_cols(std::size_t i) const {
        return {col_indices_.data() + row_offsets_[i],
                row_offsets_[i + 1] - row_offsets_[i]};
    }

    /// Values of row i.
    std::span<const double> row_values(std::size_t i) const {
        return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
    }

  private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

/// Builds a canonical CSR matrix from COO triples. Duplicate (row, col)
/// entries are summed; entries that end up exactly zero are dropped.
/// Throws ValueError on out-of-range indices or non-finite values.
SparseMatrix csr_from_coo(std::size_t n_rows, std::size_t n_cols,
                          std::span<const Coo> triples);

/// Lists the stored entries in row-major order.
std::vector<Coo> to_triples(const SparseMatrix& s);

/// Sparse x dense product, 64-bit exact per entry: the products contributing
/// to each output cell are reduced in a canonical order independent of vertex
/// labeling, so results are bit-reproducible and permutation-transparent.
Matrix spmm(const SparseMatrix& s, const Matrix& x);

Matrix to_dense(const SparseMatrix& s);

SparseMatrix transpose(const SparseMatrix& s);

/// True iff |S - S^T| <= tol entrywise (tol = 0 demands exact equality,
/// including matching sparsity patterns up to stored zeros).
bool is_symmetric(const SparseMatrix& s, double tol);

/// scale * S + shift * I, in canonical form.
SparseMatrix add_scaled_identity(const SparseMatrix& s, double scale, double shift);

/// Dominant-eigenvalue estimate by power iteration with a seeded random start.
/// For a symmetric PSD matrix this is lambda_max; convergence is declared when
/// the residual ||Sx - lambda x|| drops below tol * max(1, |lambda|), which for
/// symmetric matrices bounds the eigenvalue error by the same amount.
/// Throws ValueError if S is not symmetric (checked up to 1e-12) and
/// ConvergenceError (carrying the last iterate) if max_iter is exhausted.
double power_iteration_lmax(const SparseMatrix& s, double tol = 1e-6,
                            std::size_t max_iter = 10000, std::uint64_t seed = 1);

}  // namespace gcrn
