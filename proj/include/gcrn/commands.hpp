#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gcrn/data.hpp"

namespace gcrn {

// Command bodies behind the CLI. They throw the library error types for
// validation and numeric failures; the CLI maps those onto the exit-code
// contract (0 success, 1 check failure, 2 usage/validation, 3 numeric).

int cmd_train(const std::string& config_path, const std::string& resume_path = "");

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             std::size_t rollout = 0);

/// Returns 0 iff every trial's max relative error stays within 1e-5.
/// corrupt_analytic is a test hook that falsifies the analytic gradient.
int cmd_gradcheck(const std::string& cell_kind, std::uint64_t seed, std::size_t trials,
                  bool corrupt_analytic = false);

struct GraphBuildArgs {
    std::string points_path;
    std::string out_path;
    std::size_t k = 4;
    std::string metric = "euclidean";
    std::optional<double> sigma;  // nullopt = auto kernel width
};

int cmd_graph_build(const GraphBuildArgs& args);
int cmd_graph_info(const std::string& graph_path);

int cmd_gen_shapes(const ShapesConfig& config, const std::string& out_path);

}  // namespace gcrn
