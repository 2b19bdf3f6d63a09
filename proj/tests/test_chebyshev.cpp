#include <doctest.h>

#include <cmath>

#include "gcrn/chebyshev.hpp"
#include "gcrn/errors.hpp"
#include "gcrn/gradcheck.hpp"
#include "gcrn/graph.hpp"
#include "oracles.hpp"

using namespace gcrn;
using namespace gcrn::test;

namespace {

ChebFilterBank random_bank(std::size_t k, std::size_t d_in, std::size_t d_out, Rng& rng) {
    ChebFilterBank bank(k, d_in, d_out);
    for (std::size_t s = 0; s < k; ++s) {
        bank.slice(s) = random_matrix(d_in, d_out, rng);
    }
    return bank;
}

SparseMatrix random_scaled_laplacian(std::size_t n, Rng& rng) {
    return Graph(random_adjacency(n, 0.3, rng)).scaled_laplacian();
}

}  // namespace

TEST_CASE("K=1 filtering is pure channel mixing") {
    Rng rng(3);
    const SparseMatrix lt = random_scaled_laplacian(5, rng);
    const Matrix x = random_matrix(5, 3, rng);
    const ChebFilterBank bank = random_bank(1, 3, 2, rng);
    const Matrix y = cheb_forward(lt, x, bank);
    CHECK(max_abs_diff(y, matmul(x, bank.slice(0))) == 0.0);
}

TEST_CASE("the cache's order-zero basis signal is the input itself") {
    Rng rng(4);
    const SparseMatrix lt = random_scaled_laplacian(6, rng);
    const Matrix x = random_matrix(6, 2, rng);
    ChebCache cache;
    cheb_forward(lt, x, random_bank(4, 2, 3, rng), &cache);
    REQUIRE(cache.basis.size() == 4);
    CHECK(max_abs_diff(cache.basis[0], x) == 0.0);
}

TEST_CASE("K=2 pick-out-T1 bank applies the Laplacian") {
    const std::vector<Coo> triples = {{0, 1, -1.0}, {1, 0, -1.0}};
    const SparseMatrix lt = csr_from_coo(2, 2, triples);
    ChebFilterBank bank(2, 1, 1);
    bank.slice(0)(0, 0) = 0.0;
    bank.slice(1)(0, 0) = 1.0;
    Matrix x(2, 1);
    x(0, 0) = 1.0;
    const Matrix y = cheb_forward(lt, x, bank);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(1, 0) == -1.0);
}

TEST_CASE("filtering at the identity Laplacian sums the coefficients") {
    Rng rng(5);
    std::vector<Coo> eye;
    for (std::size_t i = 0; i < 4; ++i) eye.push_back({i, i, 1.0});
    const SparseMatrix lt = csr_from_coo(4, 4, eye);
    const Matrix x = random_matrix(4, 2, rng);
    const ChebFilterBank bank = random_bank(5, 2, 3, rng);
    Matrix theta_sum = bank.slice(0);
    for (std::size_t k = 1; k < 5; ++k) axpy(theta_sum, 1.0, bank.slice(k));
    const Matrix y = cheb_forward(lt, x, bank);
    CHECK(max_abs_diff(y, matmul(x, theta_sum)) <= 1e-12);
}

TEST_CASE("recurrence agrees with the dense polynomial oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng.below(31);
        const std::size_t k = 1 + rng.below(6);
        const std::size_t d_in = 1 + rng.below(4);
        const std::size_t d_out = 1 + rng.below(4);
        const SparseMatrix lt = random_scaled_laplacian(n, rng);
        const Matrix x = random_matrix(n, d_in, rng);
        const ChebFilterBank bank = random_bank(k, d_in, d_out, rng);
        const Matrix fast = cheb_forward(lt, x, bank);
        const Matrix oracle = cheb_forward_dense_oracle(to_dense(lt), x, bank);
        CHECK(max_abs_diff(fast, oracle) <= 1e-10);
    }
}

TEST_CASE("dense oracle is guarded to n <= 64") {
    Rng rng(9);
    const Matrix big(65, 65);
    const Matrix x(65, 1);
    const ChebFilterBank bank = random_bank(2, 1, 1, rng);
    CHECK_THROWS_AS(cheb_forward_dense_oracle(big, x, bank), ValueError);
}

TEST_CASE("delta inputs stay inside the (K-1)-hop ball, exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + rng.below(29);
        const std::size_t k = 1 + rng.below(6);
        const Matrix pts = random_matrix(n, 2, rng);
        const Graph g = knn_graph(pts, 1 + rng.below(3), Metric::euclidean);
        const SparseMatrix& lt = g.scaled_laplacian();
        const ChebFilterBank bank = random_bank(k, 1, 1, rng);

        const std::size_t v = rng.below(n);
        Matrix delta(n, 1);
        delta(v, 0) = 1.0;
        const Matrix y = cheb_forward(lt, delta, bank);
        const auto hops = hop_distances(g, v);
        for (std::size_t u = 0; u < n; ++u) {
            if (hops[u] == kUnreachable || hops[u] > k - 1) {
                CHECK(y(u, 0) == 0.0);
            }
        }
    }
}

TEST_CASE("cheb_forward is exactly permutation equivariant") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.below(30);
        const std::size_t k = 1 + rng.below(5);
        const SparseMatrix lt = random_scaled_laplacian(n, rng);
        const Matrix x = random_matrix(n, 2, rng);
        const ChebFilterBank bank = random_bank(k, 2, 2, rng);
        const auto perm = random_permutation(n, rng);
        const Matrix direct = permute_rows(cheb_forward(lt, x, bank), perm);
        const Matrix relabeled =
            cheb_forward(permute_sparse(lt, perm), permute_rows(x, perm), bank);
        CHECK(max_abs_diff(direct, relabeled) == 0.0);
    }
}

TEST_CASE("cheb_forward is linear in the signal and the coefficients") {
    Rng rng(17);
    const std::size_t n = 9;
    const SparseMatrix lt = random_scaled_laplacian(n, rng);
    const Matrix x1 = random_matrix(n, 2, rng);
    const Matrix x2 = random_matrix(n, 2, rng);
    const ChebFilterBank b1 = random_bank(3, 2, 2, rng);
    ChebFilterBank b2 = random_bank(3, 2, 2, rng);

    // Signal linearity.
    const Matrix lhs = cheb_forward(lt, x1 + x2, b1);
    const Matrix rhs = cheb_forward(lt, x1, b1) + cheb_forward(lt, x2, b1);
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);

    // Coefficient linearity.
    ChebFilterBank sum = b1;
    for (std::size_t k = 0; k < 3; ++k) axpy(sum.slice(k), 1.0, b2.slice(k));
    const Matrix lhs_theta = cheb_forward(lt, x1, sum);
    const Matrix rhs_theta = cheb_forward(lt, x1, b1) + cheb_forward(lt, x1, b2);
    CHECK(max_abs_diff(lhs_theta, rhs_theta) <= 1e-12);
}

TEST_CASE("zero cotangent gives zero gradients") {
    Rng rng(19);
    const SparseMatrix lt = random_scaled_laplacian(6, rng);
    const Matrix x = random_matrix(6, 2, rng);
    const ChebFilterBank bank = random_bank(3, 2, 2, rng);
    ChebCache cache;
    cheb_forward(lt, x, bank, &cache);
    ChebFilterBank d_bank(3, 2, 2);
    const Matrix d_x = cheb_backward(lt, cache, bank, Matrix(6, 2), d_bank);
    CHECK(max_abs(d_x) == 0.0);
    for (std::size_t k = 0; k < 3; ++k) CHECK(max_abs(d_bank.slice(k)) == 0.0);
}

TEST_CASE("K=1 backward is the plain linear-layer adjoint") {
    Rng rng(23);
    const SparseMatrix lt = random_scaled_laplacian(5, rng);
    const Matrix x = random_matrix(5, 3, rng);
    const ChebFilterBank bank = random_bank(1, 3, 2, rng);
    ChebCache cache;
    cheb_forward(lt, x, bank, &cache);
    const Matrix d_y = random_matrix(5, 2, rng);
    ChebFilterBank d_bank(1, 3, 2);
    const Matrix d_x = cheb_backward(lt, cache, bank, d_y, d_bank);
    CHECK(max_abs_diff(d_x, matmul_nt(d_y, bank.slice(0))) == 0.0);
    CHECK(max_abs_diff(d_bank.slice(0), matmul_tn(x, d_y)) == 0.0);
}

TEST_CASE("cheb gradients match central finite differences") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        const std::size_t k = 1 + rng.below(4);
        const std::size_t d_in = 1 + rng.below(3);
        const std::size_t d_out = 1 + rng.below(3);
        const SparseMatrix lt = random_scaled_laplacian(n, rng);
        Matrix x = random_matrix(n, d_in, rng);
        ChebFilterBank bank = random_bank(k, d_in, d_out, rng);
        const Matrix weights = random_matrix(n, d_out, rng);

        auto loss = [&]() {
            const Matrix y = cheb_forward(lt, x, bank);
            double acc = 0.0;
            auto yd = y.data();
            auto wd = weights.data();
            for (std::size_t i = 0; i < yd.size(); ++i) acc += yd[i] * wd[i];
            return acc;
        };

        ChebCache cache;
        cheb_forward(lt, x, bank, &cache);
        ChebFilterBank d_bank(k, d_in, d_out);
        Matrix d_x = cheb_backward(lt, cache, bank, weights, d_bank);

        std::vector<TensorRef> tensors;
        std::vector<ConstTensorRef> analytic;
        for (std::size_t s = 0; s < k; ++s) {
            tensors.push_back({"theta", &bank.slice(s)});
            analytic.push_back({"theta", &d_bank.slice(s)});
        }
        tensors.push_back({"x", &x});
        analytic.push_back({"x", &d_x});
        CHECK(finite_difference_max_error(loss, tensors, analytic) <= 1e-6);
    }
}

TEST_CASE("adjoint identity <dY, F(X)> = <dX, X>") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 3 + rng.below(10);
        const std::size_t k = 1 + rng.below(5);
        const SparseMatrix lt = random_scaled_laplacian(n, rng);
        const Matrix x = random_matrix(n, 2, rng);
        const ChebFilterBank bank = random_bank(k, 2, 3, rng);
        const Matrix d_y = random_matrix(n, 3, rng);

        ChebCache cache;
        const Matrix y = cheb_forward(lt, x, bank, &cache);
        ChebFilterBank d_bank(k, 2, 3);
        const Matrix d_x = cheb_backward(lt, cache, bank, d_y, d_bank);

        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += y.data()[i] * d_y.data()[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data()[i] * d_x.data()[i];
        CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs)));
    }
}

TEST_CASE("shape validation") {
    Rng rng(37);
    const SparseMatrix lt = random_scaled_laplacian(4, rng);
    const ChebFilterBank bank = random_bank(2, 3, 2, rng);
    CHECK_THROWS_AS(cheb_forward(lt, Matrix(4, 2), bank), DimensionError);
    CHECK_THROWS_AS(cheb_forward(lt, Matrix(5, 3), bank), DimensionError);

    ChebCache cache;
    cheb_forward(lt, Matrix(4, 3), bank, &cache);
    ChebFilterBank d_bank(2, 3, 2);
    CHECK_THROWS_AS(cheb_backward(lt, cache, bank, Matrix(4, 3), d_bank), DimensionError);
    ChebFilterBank wrong_order(3, 3, 2);
    CHECK_THROWS_AS(cheb_backward(lt, cache, bank, Matrix(4, 2), wrong_order),
                    DimensionError);
    ChebCache truncated = cache;
    truncated.basis.pop_back();
    CHECK_THROWS_AS(cheb_backward(lt, truncated, bank, Matrix(4, 2), d_bank),
                    DimensionError);
}
