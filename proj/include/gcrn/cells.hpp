#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcrn/chebyshev.hpp"
#include "gcrn/matrix.hpp"
#include "gcrn/sparse.hpp"

namespace gcrn {

/// Recurrent cell variants. fclstm is the fully-connected baseline; gcrn_m1
/// stacks a Chebyshev feature extractor in front of it; gclstm_m2, gcrnn and
/// gcgru replace every gate map with a graph convolution.
enum class CellKind { fclstm, gcrn_m1, gclstm_m2, gcrnn, gcgru };

enum class PeepholeMode { disabled, shared, per_vertex };

const char* to_string(CellKind kind);
const char* to_string(PeepholeMode mode);
CellKind cell_kind_from_string(const std::string& s);
PeepholeMode peephole_mode_from_string(const std::string& s);

bool is_graph_kind(CellKind kind);
bool is_lstm_kind(CellKind kind);

struct CellSpec {
    CellKind kind = CellKind::gclstm_m2;
    std::size_t n = 1;    // vertices
    std::size_t d_x = 1;  // input channels
    std::size_t d_h = 1;  // hidden channels
    std::size_t k = 1;    // Chebyshev support (graph kinds)
    PeepholeMode peepholes = PeepholeMode::per_vertex;  // LSTM kinds

    void validate() const;
};

/// A learnable linear map on graph signals: either a vertex-shared dense
/// matrix (applied row-wise) or a Chebyshev filter bank over the graph.
class GateMap {
  public:
    GateMap() = default;
    static GateMap dense(std::size_t d_in, std::size_t d_out);
    static GateMap cheb(std::size_t k, std::size_t d_in, std::size_t d_out);

    bool is_cheb() const { return cheb_; }
    std::size_t d_in() const;
    std::size_t d_out() const;
    std::size_t param_count() const;

    Matrix& dense_weight() { return dense_; }
    const Matrix& dense_weight() const { return dense_; }
    ChebFilterBank& bank() { return bank_; }
    const ChebFilterBank& bank() const { return bank_; }

    void init_glorot(Rng& rng);

    struct Cache {
        Matrix input;    // dense path
        ChebCache cheb;  // filter path
    };

    /// lt may be null for dense maps; required for filter maps.
    Matrix forward(const SparseMatrix* lt, const Matrix& x, Cache& cache) const;

    /// Returns the input cotangent and accumulates weight gradients into
    /// grad, which must be a same-shape map.
    Matrix backward(const SparseMatrix* lt, const Cache& cache, const Matrix& d_y,
                    GateMap& grad) const;

  private:
    bool cheb_ = false;
    Matrix dense_;
    ChebFilterBank bank_;
};

/// Mutable view of one parameter tensor, used by initializers, optimizers,
/// gradient checks and the checkpoint writer. Enumeration order is fixed.
struct TensorRef {
    std::string name;
    Matrix* tensor;
};

struct ConstTensorRef {
    std::string name;
    const Matrix* tensor;
};

/// All weights of one cell. Gate order is {i, f, c, o} for LSTM kinds,
/// {z, r, h} for the GRU, and the single pair {x, h} for the vanilla RNN.
/// Peepholes are {i, f, o}.
struct CellParams {
    CellSpec spec;
    GateMap feature;              // gcrn_m1 only: K x d_x -> d_x bank
    std::vector<GateMap> w_x;     // per-gate input maps
    std::vector<GateMap> w_h;     // per-gate recurrent maps
    std::vector<Matrix> biases;   // per-gate 1 x d_h rows
    std::vector<Matrix> peep;     // n x d_h or 1 x d_h, empty when disabled

    std::vector<TensorRef> tensors(const std::string& prefix = "");
    std::vector<ConstTensorRef> tensors(const std::string& prefix = "") const;

    /// Total scalars across all tensors (direct enumeration).
    std::size_t allocated_count() const;
};

/// Deterministic initialization: gate biases b_i, b_f, b_o (and the GRU's
/// b_z, b_r) start at one so the gates are initially open; candidate biases
/// start at zero; everything else follows the Glorot-style uniform rule.
CellParams cell_init(const CellSpec& spec, std::uint64_t seed);

/// Same shapes as cell_init, all values zero. Gradient accumulator.
CellParams cell_zeros(const CellSpec& spec);

/// Closed-form parameter count for a spec; matches allocated_count exactly.
std::size_t param_count(const CellSpec& spec);

/// Hidden (and for LSTM kinds, cell) state, one row per vertex.
struct CellState {
    Matrix h;
    Matrix c;  // empty for gcrnn / gcgru
};

CellState initial_state(const CellSpec& spec);

/// Everything the backward pass needs from one forward step.
struct CellCache {
    CellKind kind;
    Matrix h_prev, c_prev;
    GateMap::Cache feature_cache;
    Matrix x_cnn;  // gcrn_m1 feature output
    std::vector<GateMap::Cache> x_caches, h_caches;
    // LSTM kinds
    Matrix gate_i, gate_f, gate_g, gate_o, c_new, tanh_c;
    // GRU
    Matrix gate_z, gate_r, h_bar, reset_h;
    // RNN
    Matrix h_new;
};

/// One recurrent step. lt is the scaled Laplacian (ignored by fclstm).
/// Returns the new state; gates pass through sigma/tanh so h stays in
/// [-1, 1] elementwise.
CellState cell_step(const CellParams& params, const SparseMatrix* lt, const Matrix& x,
                    const CellState& prev, CellCache& cache);

struct CellBackward {
    Matrix d_x;
    CellState d_prev;
};

/// Exact single-step adjoint. d_h is the loss cotangent at this step,
/// d_next the cotangent flowing back from the following step (empty
/// matrices read as zero). Parameter gradients accumulate into grads.
CellBackward cell_backward(const CellParams& params, const SparseMatrix* lt,
                           const CellCache& cache, const Matrix& d_h,
                           const CellState& d_next, CellParams& grads);

}  // namespace gcrn
