#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>

#include "gcrn/cells.hpp"
#include "gcrn/graph.hpp"
#include "gcrn/optim.hpp"
#include "gcrn/training.hpp"

namespace gcrn {

/// Everything a training run needs, parsed from the `key = value` config
/// format (one key per line, `#` comments, namespaced keys).
struct RunConfig {
    std::string task = "shapes";  // shapes | tokens

    // cell.*
    CellKind cell_kind = CellKind::gclstm_m2;
    std::size_t d_h = 8;
    std::size_t k = 3;
    PeepholeMode peepholes = PeepholeMode::per_vertex;
    std::size_t layers = 1;

    // graph.*
    std::string graph_source = "grid";  // grid | file | knn
    std::size_t grid_rows = 16, grid_cols = 16, grid_conn = 8;
    std::string graph_file;
    std::string points_file;
    std::size_t knn_k = 4;
    Metric metric = Metric::euclidean;
    std::optional<double> sigma;  // nullopt = auto
    LambdaMaxMode lambda_mode = LambdaMaxMode::estimate;

    // optim.*
    OptimizerConfig optim;

    // train.*
    TrainConfig train;

    // data.* / out.*
    std::string data_path;
    std::string valid_path;  // optional; empty = validate on the training data
    std::string out_dir = ".";

    void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::filesystem::path& path);

/// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace gcrn
