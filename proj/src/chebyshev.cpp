#include "gcrn/chebyshev.hpp"

#include <cmath>
#include <string>

#include "gcrn/errors.hpp"

namespace gcrn {

namespace {

void check_forward_shapes(const SparseMatrix& lt, const Matrix& x,
                          const ChebFilterBank& bank) {
    if (bank.order() == 0) throw ValueError("cheb: empty filter bank");
    if (lt.n_rows() != lt.n_cols()) throw DimensionError("cheb: Laplacian must be square");
    if (lt.n_rows() != x.rows()) {
        throw DimensionError("cheb: Laplacian is " + std::to_string(lt.n_rows()) +
                             "x" + std::to_string(lt.n_cols()) + " but signal has " +
                             std::to_string(x.rows()) + " rows");
    }
    if (bank.d_in() != x.cols()) {
        throw DimensionError("cheb: bank expects " + std::to_string(bank.d_in()) +
                             " input channels, signal has " + std::to_string(x.cols()));
    }
}

}  // namespace

ChebFilterBank::ChebFilterBank(std::size_t k, std::size_t d_in, std::size_t d_out) {
    if (k < 1 || d_in < 1 || d_out < 1) {
        throw ValueError("ChebFilterBank: K, d_in, d_out must all be >= 1");
    }
    theta_.assign(k, Matrix(d_in, d_out));
}

ChebFilterBank ChebFilterBank::glorot(std::size_t k, std::size_t d_in, std::size_t d_out,
                                      Rng& rng) {
    ChebFilterBank bank(k, d_in, d_out);
    const double a = std::sqrt(6.0 / (static_cast<double>(k) *
                                      static_cast<double>(d_in + d_out)));
    for (std::size_t i = 0; i < k; ++i) {
        bank.theta_[i] = Matrix::uniform(d_in, d_out, a, rng);
    }
    return bank;
}

Matrix cheb_forward(const SparseMatrix& lt, const Matrix& x, const ChebFilterBank& bank,
                    ChebCache* cache) {
    check_forward_shapes(lt, x, bank);
    const std::size_t k_max = bank.order();

    if (cache) {
        cache->basis.clear();
        cache->basis.reserve(k_max);
    }

    Matrix t_prev2 = x;  // T_0
    Matrix y = matmul(t_prev2, bank.slice(0));
    if (cache) cache->basis.push_back(t_prev2);

    if (k_max == 1) return y;

    Matrix t_prev = spmm(lt, x);  // T_1
    axpy(y, 1.0, matmul(t_prev, bank.slice(1)));
    if (cache) cache->basis.push_back(t_prev);

    for (std::size_t k = 2; k < k_max; ++k) {
        Matrix t_k = 2.0 * spmm(lt, t_prev);
        axpy(t_k, -1.0, t_prev2);
        axpy(y, 1.0, matmul(t_k, bank.slice(k)));
        t_prev2 = std::move(t_prev);
        t_prev = std::move(t_k);
        if (cache) cache->basis.push_back(t_prev);
    }
    return y;
}

Matrix cheb_backward(const SparseMatrix& lt, const ChebCache& cache,
                     const ChebFilterBank& bank, const Matrix& d_y,
                     ChebFilterBank& d_bank) {
    const std::size_t k_max = bank.order();
    if (cache.basis.size() != k_max) {
        throw DimensionError("cheb_backward: cache holds " +
                             std::to_string(cache.basis.size()) + " basis signals, bank order is " +
                             std::to_string(k_max));
    }
    if (d_bank.order() != k_max || d_bank.d_in() != bank.d_in() ||
        d_bank.d_out() != bank.d_out()) {
        throw DimensionError("cheb_backward: gradient bank shape mismatch");
    }
    if (d_y.rows() != cache.basis[0].rows() || d_y.cols() != bank.d_out()) {
        throw DimensionError("cheb_backward: cotangent shape mismatch");
    }

    // Coefficient gradients need only the cached basis.
    for (std::size_t k = 0; k < k_max; ++k) {
        axpy(d_bank.slice(k), 1.0, matmul_tn(cache.basis[k], d_y));
    }

    // Reverse sweep of the recurrence: s_k is the cotangent of T_k, seeded by
    // the output sum and propagated down through T_k = 2 lt T_{k-1} - T_{k-2}.
    std::vector<Matrix> s(k_max);
    for (std::size_t k = 0; k < k_max; ++k) {
        s[k] = matmul_nt(d_y, bank.slice(k));
    }
    for (std::size_t k = k_max; k-- > 2;) {
        axpy(s[k - 1], 2.0, spmm(lt, s[k]));
        axpy(s[k - 2], -1.0, s[k]);
    }
    if (k_max >= 2) {
        axpy(s[0], 1.0, spmm(lt, s[1]));  // T_1 = lt T_0
    }
    return std::move(s[0]);
}

Matrix cheb_forward_dense_oracle(const Matrix& lt_dense, const Matrix& x,
                                 const ChebFilterBank& bank) {
    if (lt_dense.rows() != lt_dense.cols() || lt_dense.rows() != x.rows()) {
        throw DimensionError("cheb_forward_dense_oracle: shape mismatch");
    }
    if (lt_dense.rows() > 64) {
        throw ValueError("cheb_forward_dense_oracle: guarded to n <= 64");
    }
    const std::size_t n = lt_dense.rows();
    const std::size_t k_max = bank.order();

    Matrix p_prev2(n, n);  // T_0(lt) = I
    for (std::size_t i = 0; i < n; ++i) p_prev2(i, i) = 1.0;
    Matrix y = matmul(matmul(p_prev2, x), bank.slice(0));

    if (k_max == 1) return y;

    Matrix p_prev = lt_dense;  // T_1(lt)
    axpy(y, 1.0, matmul(matmul(p_prev, x), bank.slice(1)));

    for (std::size_t k = 2; k < k_max; ++k) {
        Matrix p_k = 2.0 * matmul(lt_dense, p_prev);
        axpy(p_k, -1.0, p_prev2);
        axpy(y, 1.0, matmul(matmul(p_k, x), bank.slice(k)));
        p_prev2 = std::move(p_prev);
        p_prev = std::move(p_k);
    }
    return y;
}

}  // namespace gcrn
