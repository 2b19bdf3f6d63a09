#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcrn/cells.hpp"
#include "gcrn/chebyshev.hpp"
#include "gcrn/matrix.hpp"
#include "gcrn/sparse.hpp"

namespace gcrn {

/// Prediction head. dense_sigmoid maps each vertex's hidden row to output
/// channels through a K=1 filter bank and a sigmoid (next-frame tasks);
/// token_softmax sum-pools the hidden signal over vertices and maps the
/// pooled vector affinely to vocabulary logits.
enum class ReadoutKind { dense_sigmoid, token_softmax };

const char* to_string(ReadoutKind kind);
ReadoutKind readout_kind_from_string(const std::string& s);

struct ModelSpec {
    std::vector<CellSpec> cells;  // 1 or 2 stacked; layer i>0 takes d_h of layer i-1
    ReadoutKind readout = ReadoutKind::dense_sigmoid;
    std::size_t d_out = 1;  // output channels (dense) or vocabulary size (token)

    void validate() const;
};

/// A cell stack plus its readout head.
struct Model {
    ModelSpec spec;
    std::vector<CellParams> cells;
    ChebFilterBank out_bank;  // dense head: K=1, d_h -> d_out
    Matrix out_w;             // token head: d_h x d_out
    Matrix out_b;             // token head: 1 x d_out

    std::vector<TensorRef> tensors();
    std::vector<ConstTensorRef> tensors() const;
    std::size_t allocated_count() const;
};

Model model_init(const ModelSpec& spec, std::uint64_t seed);
Model model_zeros(const ModelSpec& spec);

struct ReadoutCache {
    ChebCache cheb;  // dense head
    Matrix pred;     // dense head: sigmoid output
    Matrix h_in;     // token head: hidden signal before pooling
};

/// Maps the top hidden signal to predictions (dense head, n x d_out in (0,1))
/// or logits (token head, 1 x d_out).
Matrix readout_forward(const Model& model, const SparseMatrix* lt, const Matrix& h_top,
                       ReadoutCache& cache);

/// Adjoint of readout_forward; returns the hidden-signal cotangent and
/// accumulates head gradients into grads.
Matrix readout_backward(const Model& model, const SparseMatrix* lt,
                        const ReadoutCache& cache, const Matrix& d_out, Model& grads);

}  // namespace gcrn
