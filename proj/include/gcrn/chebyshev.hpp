#pragma once

#include <cstddef>
#include <vector>

#include "gcrn/matrix.hpp"
#include "gcrn/rng.hpp"
#include "gcrn/sparse.hpp"

namespace gcrn {

/// Chebyshev coefficient tensor of shape K x d_in x d_out, stored as K
/// channel-mixing slices. Slice k multiplies the order-k basis signal
/// T_k(scaled Laplacian) * X.
class ChebFilterBank {
  public:
    ChebFilterBank() = default;
    ChebFilterBank(std::size_t k, std::size_t d_in, std::size_t d_out);

    /// Coefficients drawn uniformly from [-a, a] with
    /// a = sqrt(6 / (K * (d_in + d_out))).
    static ChebFilterBank glorot(std::size_t k, std::size_t d_in, std::size_t d_out,
                                 Rng& rng);

    std::size_t order() const { return theta_.size(); }
    std::size_t d_in() const { return theta_.empty() ? 0 : theta_[0].rows(); }
    std::size_t d_out() const { return theta_.empty() ? 0 : theta_[0].cols(); }
    std::size_t param_count() const { return order() * d_in() * d_out(); }

    Matrix& slice(std::size_t k) { return theta_[k]; }
    const Matrix& slice(std::size_t k) const { return theta_[k]; }

  private:
    std::vector<Matrix> theta_;
};

/// The K Chebyshev basis signals T_k(Lt) * X retained for the backward pass;
/// basis[0] is X itself.
struct ChebCache {
    std::vector<Matrix> basis;
};

/// Y = sum_k T_k(lt) * X * theta_k via the three-term recurrence
/// T_0 = X, T_1 = lt X, T_k = 2 lt T_{k-1} - T_{k-2}.
/// If cache is non-null the basis signals are stored there.
Matrix cheb_forward(const SparseMatrix& lt, const Matrix& x, const ChebFilterBank& bank,
                    ChebCache* cache = nullptr);

/// Exact adjoint of cheb_forward. Returns dX and accumulates the coefficient
/// gradients dTheta_k = (T_k X)^T dY into d_bank. Relies on the symmetry of
/// the scaled Laplacian so the reverse recurrence reuses lt unchanged.
Matrix cheb_backward(const SparseMatrix& lt, const ChebCache& cache,
                     const ChebFilterBank& bank, const Matrix& d_y,
                     ChebFilterBank& d_bank);

/// Test oracle: evaluates each T_k(lt) as an explicit dense matrix polynomial
/// and applies it, sharing no code with the sparse recurrence. Guarded to
/// n <= 64.
Matrix cheb_forward_dense_oracle(const Matrix& lt_dense, const Matrix& x,
                                 const ChebFilterBank& bank);

}  // namespace gcrn
