#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "gcrn/matrix.hpp"
#include "gcrn/sparse.hpp"

namespace gcrn {

enum class Metric { euclidean, cosine };

/// How Graph::lambda_max obtains its value: a power-iteration estimate
/// (tighter Chebyshev scaling) or the constant upper bound 2 valid for any
/// normalized Laplacian.
enum class LambdaMaxMode { estimate, upper_bound };

/// Hop count reported for unreachable vertices.
inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Undirected weighted graph with cached spectral quantities. The adjacency
/// is validated at construction (symmetric, non-negative, zero diagonal);
/// the normalized Laplacian, lambda_max and the scaled Laplacian are computed
/// once on first use and shared by all copies.
class Graph {
  public:
    explicit Graph(SparseMatrix adjacency, LambdaMaxMode mode = LambdaMaxMode::estimate);

    std::size_t n() const { return adjacency_.n_rows(); }
    const SparseMatrix& adjacency() const { return adjacency_; }
    LambdaMaxMode mode() const { return mode_; }

    /// L = I - D^{-1/2} A D^{-1/2}; isolated vertices get an identity row.
    const SparseMatrix& laplacian() const;

    /// Largest Laplacian eigenvalue per the graph's LambdaMaxMode.
    double lambda_max() const;

    /// 2 L / lambda_max - I, the Chebyshev evaluation domain.
    const SparseMatrix& scaled_laplacian() const;

  private:
    struct Derived {
        std::once_flag laplacian_once;
        std::once_flag lambda_once;
        std::once_flag scaled_once;
        SparseMatrix laplacian;
        double lambda_max = 0.0;
        SparseMatrix scaled;
    };

    SparseMatrix adjacency_;
    LambdaMaxMode mode_;
    std::shared_ptr<Derived> derived_;
};

/// K-nearest-neighbor graph with Gaussian kernel weights
/// w_ij = exp(-dist(i,j)^2 / sigma^2), symmetrized by A <- max(A, A^T).
/// kernel_width nullopt selects sigma = mean of the retained knn distances.
/// Ties in the neighbor selection break toward the smaller vertex index.
Graph knn_graph(const Matrix& points, std::size_t k, Metric metric,
                std::optional<double> kernel_width = std::nullopt,
                LambdaMaxMode mode = LambdaMaxMode::estimate);

/// Lattice graph on rows x cols vertices: connectivity 4 links horizontal and
/// vertical neighbors, 8 adds the diagonals. Weights use the same Gaussian
/// kernel rule as knn_graph on the lattice distances.
Graph grid_graph(std::size_t rows, std::size_t cols, std::size_t connectivity,
                 std::optional<double> kernel_width = std::nullopt,
                 LambdaMaxMode mode = LambdaMaxMode::estimate);

/// Normalized Laplacian of a symmetric non-negative adjacency.
SparseMatrix normalized_laplacian(const SparseMatrix& adjacency);

/// (2 / lambda_max) L - I. Throws ValueError for lambda_max <= 0.
SparseMatrix scale_laplacian(const SparseMatrix& laplacian, double lambda_max);

/// Breadth-first hop counts over the adjacency support; kUnreachable marks
/// vertices with no path from source.
std::vector<std::size_t> hop_distances(const Graph& g, std::size_t source);

/// GCRNGRAPH v1 text format.
void save_graph(const std::filesystem::path& path, const Graph& g);
Graph load_graph(const std::filesystem::path& path,
                 LambdaMaxMode mode = LambdaMaxMode::estimate);

/// GCRNPTS v1 text format: a header, `n p`, then n rows of p coordinates.
void save_points(const std::filesystem::path& path, const Matrix& points);
Matrix load_points(const std::filesystem::path& path);

}  // namespace gcrn
