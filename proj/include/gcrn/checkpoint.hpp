#pragma once

#include <cstdint>
#include <filesystem>

#include "gcrn/graph.hpp"
#include "gcrn/model.hpp"
#include "gcrn/optim.hpp"
#include "gcrn/training.hpp"

namespace gcrn {

/// Text checkpoint: model spec, the training graph, every parameter and
/// optimizer tensor printed with 17 significant digits (lossless 64-bit round
/// trip), and the training counters. save -> load -> save is byte-identical.
struct Checkpoint {
    std::string task = "shapes";  // shapes | tokens
    LambdaMaxMode lambda_mode = LambdaMaxMode::estimate;
    SparseMatrix graph_adjacency;
    Model model;
    OptimizerKind opt_kind = OptimizerKind::rmsprop;
    OptimizerState opt_state;
    TrainState train_state;
    std::uint64_t seed = 1;
};

void checkpoint_save(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace gcrn
