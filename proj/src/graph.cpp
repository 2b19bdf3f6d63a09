#include "gcrn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "gcrn/errors.hpp"
#include "gcrn/numeric.hpp"

namespace gcrn {

namespace {

void validate_adjacency(const SparseMatrix& a) {
    if (a.n_rows() != a.n_cols()) {
        throw ValueError("Graph: adjacency must be square");
    }
    if (!is_symmetric(a, 0.0)) {
        throw ValueError("Graph: adjacency must be exactly symmetric");
    }
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            if (cols[p] == i) throw ValueError("Graph: adjacency has a nonzero diagonal");
            if (vals[p] < 0.0) throw ValueError("Graph: adjacency has a negative weight");
        }
    }
}

double squared_euclidean(const Matrix& pts, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < pts.cols(); ++c) {
        const double d = pts(i, c) - pts(j, c);
        acc += d * d;
    }
    return acc;
}

/// Pairwise distance under the requested metric. Depends only on the two
/// coordinate rows, never on the row indices, so relabeling points is
/// bit-transparent.
double pair_distance(const Matrix& pts, std::size_t i, std::size_t j, Metric metric,
                     const std::vector<double>& norms) {
    if (metric == Metric::euclidean) {
        return std::sqrt(squared_euclidean(pts, i, j));
    }
    double dot = 0.0;
    for (std::size_t c = 0; c < pts.cols(); ++c) dot += pts(i, c) * pts(j, c);
    double cosine = dot / (norms[i] * norms[j]);
    cosine = std::clamp(cosine, -1.0, 1.0);
    return 1.0 - cosine;
}

Graph graph_from_weighted_edges(std::size_t n,
                                const std::map<std::pair<std::size_t, std::size_t>, double>& edges,
                                LambdaMaxMode mode) {
    std::vector<Coo> triples;
    triples.reserve(2 * edges.size());
    for (const auto& [key, w] : edges) {
        triples.push_back({key.first, key.second, w});
        triples.push_back({key.second, key.first, w});
    }
    return Graph(csr_from_coo(n, n, triples), mode);
}

}  // namespace

Graph::Graph(SparseMatrix adjacency, LambdaMaxMode mode)
    : adjacency_(std::move(adjacency)), mode_(mode), derived_(std::make_shared<Derived>()) {
    validate_adjacency(adjacency_);
}

const SparseMatrix& Graph::laplacian() const {
    std::call_once(derived_->laplacian_once,
                   [&] { derived_->laplacian = normalized_laplacian(adjacency_); });
    return derived_->laplacian;
}

double Graph::lambda_max() const {
    std::call_once(derived_->lambda_once, [&] {
        derived_->lambda_max =
            mode_ == LambdaMaxMode::upper_bound ? 2.0 : power_iteration_lmax(laplacian());
    });
    return derived_->lambda_max;
}

const SparseMatrix& Graph::scaled_laplacian() const {
    std::call_once(derived_->scaled_once,
                   [&] { derived_->scaled = scale_laplacian(laplacian(), lambda_max()); });
    return derived_->scaled;
}

Graph knn_graph(const Matrix& points, std::size_t k, Metric metric,
                std::optional<double> kernel_width, LambdaMaxMode mode) {
    const std::size_t n = points.rows();
    if (n < 2) throw ValueError("knn_graph: need at least 2 points");
    if (k < 1 || k >= n) {
        throw ValueError("knn_graph: k must satisfy 1 <= k < n, got k=" +
                         std::to_string(k) + ", n=" + std::to_string(n));
    }
    if (!points.all_finite()) throw ValueError("knn_graph: non-finite coordinate");

    std::vector<double> norms(n, 0.0);
    if (metric == Metric::cosine) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < points.cols(); ++c) s += points(i, c) * points(i, c);
            norms[i] = std::sqrt(s);
            if (norms[i] == 0.0) {
                throw ValueError("knn_graph: zero-norm point " + std::to_string(i) +
                                 " under cosine metric");
            }
        }
    }

    // Directed knn selection, ties toward the smaller index.
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbors(n);
    std::vector<double> retained;
    retained.reserve(n * k);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.emplace_back(pair_distance(points, i, j, metric, norms), j);
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (std::size_t p = 0; p < k; ++p) {
            neighbors[i].emplace_back(cand[p].second, cand[p].first);
            retained.push_back(cand[p].first);
        }
    }

    double sigma;
    if (kernel_width) {
        if (*kernel_width <= 0.0) throw ValueError("knn_graph: kernel width must be positive");
        sigma = *kernel_width;
    } else {
        sigma = sum_canonical(retained) / static_cast<double>(retained.size());
        if (sigma <= 0.0) sigma = 1.0;  // all retained distances zero
    }

    // A <- max(A, A^T): keep the larger weight of the two directions.
    std::map<std::pair<std::size_t, std::size_t>, double> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, dist] : neighbors[i]) {
            const double w = std::exp(-(dist * dist) / (sigma * sigma));
            const std::pair<std::size_t, std::size_t> key{std::min(i, j), std::max(i, j)};
            auto [it, inserted] = edges.try_emplace(key, w);
            if (!inserted) it->second = std::max(it->second, w);
        }
    }
    return graph_from_weighted_edges(n, edges, mode);
}

Graph grid_graph(std::size_t rows, std::size_t cols, std::size_t connectivity,
                 std::optional<double> kernel_width, LambdaMaxMode mode) {
    if (rows < 1 || cols < 1) throw ValueError("grid_graph: rows and cols must be >= 1");
    if (connectivity != 4 && connectivity != 8) {
        throw ValueError("grid_graph: connectivity must be 4 or 8");
    }
    const std::size_t n = rows * cols;
    auto id = [cols](std::size_t r, std::size_t c) { return r * cols + c; };

    struct Offset {
        std::ptrdiff_t dr, dc;
    };
    std::vector<Offset> offsets = {{0, 1}, {1, 0}};
    if (connectivity == 8) {
        offsets.push_back({1, 1});
        offsets.push_back({1, -1});
    }

    std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> lattice_edges;
    std::vector<double> dists;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            for (const Offset& o : offsets) {
                const std::ptrdiff_t r2 = static_cast<std::ptrdiff_t>(r) + o.dr;
                const std::ptrdiff_t c2 = static_cast<std::ptrdiff_t>(c) + o.dc;
                if (r2 < 0 || c2 < 0 || r2 >= static_cast<std::ptrdiff_t>(rows) ||
                    c2 >= static_cast<std::ptrdiff_t>(cols)) {
                    continue;
                }
                const double d = std::sqrt(static_cast<double>(o.dr * o.dr + o.dc * o.dc));
                const std::size_t a = id(r, c);
                const std::size_t b =
                    id(static_cast<std::size_t>(r2), static_cast<std::size_t>(c2));
                lattice_edges.push_back({{std::min(a, b), std::max(a, b)}, d});
                dists.push_back(d);
            }
        }
    }

    double sigma;
    if (kernel_width) {
        if (*kernel_width <= 0.0) throw ValueError("grid_graph: kernel width must be positive");
        sigma = *kernel_width;
    } else if (dists.empty()) {
        sigma = 1.0;
    } else {
        sigma = sum_canonical(dists) / static_cast<double>(dists.size());
    }

    std::map<std::pair<std::size_t, std::size_t>, double> edges;
    for (const auto& [key, d] : lattice_edges) {
        edges[key] = std::exp(-(d * d) / (sigma * sigma));
    }
    return graph_from_weighted_edges(n, edges, mode);
}

SparseMatrix normalized_laplacian(const SparseMatrix& adjacency) {
    const std::size_t n = adjacency.n_rows();
    std::vector<double> degree(n, 0.0);
    std::vector<double> row_terms;
    for (std::size_t i = 0; i < n; ++i) {
        auto vals = adjacency.row_values(i);
        row_terms.assign(vals.begin(), vals.end());
        degree[i] = sum_canonical(row_terms);
    }

    std::vector<Coo> triples;
    triples.reserve(adjacency.nnz() + n);
    for (std::size_t i = 0; i < n; ++i) {
        triples.push_back({i, i, 1.0});
        if (degree[i] == 0.0) continue;  // isolated vertex keeps the identity row
        auto cols = adjacency.row_cols(i);
        auto vals = adjacency.row_values(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const std::size_t j = cols[p];
            if (degree[j] == 0.0) continue;
            triples.push_back({i, j, -vals[p] / std::sqrt(degree[i] * degree[j])});
        }
    }
    return csr_from_coo(n, n, triples);
}

SparseMatrix scale_laplacian(const SparseMatrix& laplacian, double lambda_max) {
    if (!(lambda_max > 0.0)) {
        throw ValueError("scale_laplacian: lambda_max must be positive");
    }
    return add_scaled_identity(laplacian, 2.0 / lambda_max, -1.0);
}

std::vector<std::size_t> hop_distances(const Graph& g, std::size_t source) {
    if (source >= g.n()) throw ValueError("hop_distances: source out of range");
    std::vector<std::size_t> dist(g.n(), kUnreachable);
    std::deque<std::size_t> queue;
    dist[source] = 0;
    queue.push_back(source);
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : g.adjacency().row_cols(u)) {
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

void save_graph(const std::filesystem::path& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw ValueError("save_graph: cannot open " + path.string());
    std::vector<Coo> upper;
    for (const Coo& t : to_triples(g.adjacency())) {
        if (t.row < t.col) upper.push_back(t);
    }
    out << "GCRNGRAPH v1\n" << g.n() << " " << upper.size() << "\n";
    char buf[64];
    for (const Coo& t : upper) {
        std::snprintf(buf, sizeof buf, "%.17g", t.value);
        out << t.row << " " << t.col << " " << buf << "\n";
    }
    if (!out) throw ValueError("save_graph: write failed for " + path.string());
}

Graph load_graph(const std::filesystem::path& path, LambdaMaxMode mode) {
    std::ifstream in(path);
    if (!in) throw ValueError("load_graph: cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) throw ParseError("load_graph: unexpected end of file", line_no + 1);
        ++line_no;
        return line;
    };

    if (next_line() != "GCRNGRAPH v1") throw ParseError("load_graph: bad magic", line_no);

    std::size_t n = 0, m = 0;
    {
        std::istringstream hdr(next_line());
        if (!(hdr >> n >> m)) throw ParseError("load_graph: bad 'n m' header", line_no);
    }

    std::map<std::pair<std::size_t, std::size_t>, double> seen;
    std::vector<Coo> triples;
    for (std::size_t e = 0; e < m; ++e) {
        std::istringstream row(next_line());
        std::size_t i = 0, j = 0;
        double w = 0.0;
        if (!(row >> i >> j >> w)) throw ParseError("load_graph: bad edge line", line_no);
        if (i >= n || j >= n) throw ParseError("load_graph: vertex id out of range", line_no);
        if (i == j) throw ParseError("load_graph: self-loop rejected", line_no);
        if (i > j) throw ParseError("load_graph: edges must satisfy i < j", line_no);
        if (!(w > 0.0)) throw ParseError("load_graph: non-positive weight rejected", line_no);
        if (!seen.emplace(std::pair{i, j}, w).second) {
            throw ParseError("load_graph: duplicate edge rejected", line_no);
        }
        triples.push_back({i, j, w});
        triples.push_back({j, i, w});
    }
    return Graph(csr_from_coo(n, n, triples), mode);
}

void save_points(const std::filesystem::path& path, const Matrix& points) {
    std::ofstream out(path);
    if (!out) throw ValueError("save_points: cannot open " + path.string());
    out << "GCRNPTS v1\n" << points.rows() << " " << points.cols() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < points.rows(); ++i) {
        for (std::size_t j = 0; j < points.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", points(i, j));
            out << buf << (j + 1 == points.cols() ? "" : " ");
        }
        out << "\n";
    }
    if (!out) throw ValueError("save_points: write failed for " + path.string());
}

Matrix load_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("load_points: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "GCRNPTS v1") {
        throw ParseError("load_points: bad magic", 1);
    }
    std::size_t n = 0, p = 0;
    if (!std::getline(in, line)) throw ParseError("load_points: missing 'n p' header", 2);
    {
        std::istringstream hdr(line);
        if (!(hdr >> n >> p) || p == 0) throw ParseError("load_points: bad 'n p' header", 2);
    }
    Matrix points(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw ParseError("load_points: truncated file", 3 + i);
        std::istringstream row(line);
        for (std::size_t j = 0; j < p; ++j) {
            if (!(row >> points(i, j))) {
                throw ParseError("load_points: bad coordinate", 3 + i);
            }
        }
    }
    return points;
}

}  // namespace gcrn
