#include "gcrn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcrn/errors.hpp"
#include "gcrn/numeric.hpp"
#include "gcrn/rng.hpp"

namespace gcrn {

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices,
                           std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != values_.size() || col_indices_.size() != values_.size()) {
        throw ValueError("SparseMatrix: inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < n_rows_; ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1]) {
            throw ValueError("SparseMatrix: row_offsets not non-decreasing");
        }
        for (std::size_t p = row_offsets_[i]; p + 1 < row_offsets_[i + 1]; ++p) {
            if (col_indices_[p] >= col_indices_[p + 1]) {
                throw ValueError("SparseMatrix: columns not strictly increasing in row " +
                                 std::to_string(i));
            }
        }
    }
    for (std::size_t p = 0; p < values_.size(); ++p) {
        if (col_indices_[p] >= n_cols_) {
            throw ValueError("SparseMatrix: column index out of range");
        }
        if (!std::isfinite(values_[p])) {
            throw ValueError("SparseMatrix: non-finite value");
        }
    }
}

SparseMatrix csr_from_coo(std::size_t n_rows, std::size_t n_cols,
                          std::span<const Coo> triples) {
    for (const Coo& t : triples) {
        if (t.row >= n_rows || t.col >= n_cols) {
            throw ValueError("csr_from_coo: index (" + std::to_string(t.row) + ", " +
                             std::to_string(t.col) + ") out of range for " +
                             std::to_string(n_rows) + "x" + std::to_string(n_cols));
        }
        if (!std::isfinite(t.value)) {
            throw ValueError("csr_from_coo: non-finite value at (" +
                             std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
        }
    }

    std::vector<Coo> sorted(triples.begin(), triples.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Coo& a, const Coo& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> values;
    cols.reserve(sorted.size());
    values.reserve(sorted.size());

    std::size_t p = 0;
    for (std::size_t i = 0; i < n_rows; ++i) {
        while (p < sorted.size() && sorted[p].row == i) {
            const std::size_t col = sorted[p].col;
            double sum = 0.0;
            while (p < sorted.size() && sorted[p].row == i && sorted[p].col == col) {
                sum += sorted[p].value;  // duplicates summed in input order
                ++p;
            }
            if (sum != 0.0) {
                cols.push_back(col);
                values.push_back(sum);
            }
        }
        offsets[i + 1] = values.size();
    }
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols),
                        std::move(values));
}

std::vector<Coo> to_triples(const SparseMatrix& s) {
    std::vector<Coo> out;
    out.reserve(s.nnz());
    for (std::size_t i = 0; i < s.n_rows(); ++i) {
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            out.push_back({i, cols[p], vals[p]});
        }
    }
    return out;
}

Matrix spmm(const SparseMatrix& s, const Matrix& x) {
    if (s.n_cols() != x.rows()) {
        throw DimensionError("spmm: " + std::to_string(s.n_rows()) + "x" +
                             std::to_string(s.n_cols()) + " * " +
                             std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
    Matrix y(s.n_rows(), x.cols());
    std::vector<double> terms;
    for (std::size_t i = 0; i < s.n_rows(); ++i) {
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (std::size_t c = 0; c < x.cols(); ++c) {
            terms.clear();
            for (std::size_t p = 0; p < cols.size(); ++p) {
                terms.push_back(vals[p] * x(cols[p], c));
            }
            y(i, c) = sum_canonical(terms);
        }
    }
    return y;
}

Matrix to_dense(const SparseMatrix& s) {
    Matrix d(s.n_rows(), s.n_cols());
    for (std::size_t i = 0; i < s.n_rows(); ++i) {
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            d(i, cols[p]) = vals[p];
        }
    }
    return d;
}

SparseMatrix transpose(const SparseMatrix& s) {
    std::vector<Coo> flipped = to_triples(s);
    for (Coo& t : flipped) std::swap(t.row, t.col);
    return csr_from_coo(s.n_cols(), s.n_rows(), flipped);
}

bool is_symmetric(const SparseMatrix& s, double tol) {
    if (s.n_rows() != s.n_cols()) return false;
    const SparseMatrix st = transpose(s);
    auto a = to_triples(s);
    auto b = to_triples(st);
    // Merge-compare the two canonical listings; absent entries count as zero.
    std::size_t i = 0, j = 0;
    auto key = [](const Coo& t) { return std::pair(t.row, t.col); };
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && key(a[i]) < key(b[j]))) {
            if (std::fabs(a[i].value) > tol) return false;
            ++i;
        } else if (i == a.size() || key(b[j]) < key(a[i])) {
            if (std::fabs(b[j].value) > tol) return false;
            ++j;
        } else {
            if (std::fabs(a[i].value - b[j].value) > tol) return false;
            ++i;
            ++j;
        }
    }
    return true;
}

SparseMatrix add_scaled_identity(const SparseMatrix& s, double scale, double shift) {
    if (s.n_rows() != s.n_cols()) {
        throw DimensionError("add_scaled_identity: matrix must be square");
    }
    std::vector<Coo> triples = to_triples(s);
    for (Coo& t : triples) t.value *= scale;
    for (std::size_t i = 0; i < s.n_rows(); ++i) {
        triples.push_back({i, i, shift});
    }
    return csr_from_coo(s.n_rows(), s.n_cols(), triples);
}

double power_iteration_lmax(const SparseMatrix& s, double tol, std::size_t max_iter,
                            std::uint64_t seed) {
    if (s.n_rows() != s.n_cols() || s.n_rows() == 0) {
        throw ValueError("power_iteration_lmax: matrix must be square and non-empty");
    }
    if (!is_symmetric(s, 1e-12)) {
        throw ValueError("power_iteration_lmax: matrix is not symmetric");
    }
    const std::size_t n = s.n_rows();

    Rng rng(Rng::derive(seed, 0x9d0f));
    Matrix x(n, 1);
    double norm = 0.0;
    while (norm == 0.0) {
        for (std::size_t i = 0; i < n; ++i) x(i, 0) = rng.uniform(-1.0, 1.0);
        norm = std::sqrt(matmul_tn(x, x)(0, 0));
    }
    for (std::size_t i = 0; i < n; ++i) x(i, 0) /= norm;

    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Matrix y = spmm(s, x);
        lambda = matmul_tn(x, y)(0, 0);  // Rayleigh quotient, x is unit
        double resid2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y(i, 0) - lambda * x(i, 0);
            resid2 += r * r;
        }
        if (std::sqrt(resid2) <= tol * std::max(1.0, std::fabs(lambda))) {
            return lambda;
        }
        const double ynorm = std::sqrt(matmul_tn(y, y)(0, 0));
        if (ynorm == 0.0) {
            return 0.0;  // iterate landed in the null space; only possible if S x = 0
        }
        for (std::size_t i = 0; i < n; ++i) x(i, 0) = y(i, 0) / ynorm;
    }
    throw ConvergenceError("power_iteration_lmax: no convergence after " +
                               std::to_string(max_iter) + " iterations",
                           lambda);
}

}  // namespace gcrn
