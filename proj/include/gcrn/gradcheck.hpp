#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gcrn/cells.hpp"

namespace gcrn {

/// |a - b| relative to the larger magnitude, floored so that finite-difference
/// noise on near-zero gradients does not blow up the ratio.
double gradcheck_relative_error(double analytic, double numeric);

/// Central finite differences (default step 1e-6) of `loss` with respect to
/// every entry of every tensor, compared against the matching analytic
/// gradients. Returns the maximum relative error. The loss closure must
/// re-read the tensors on every call.
double finite_difference_max_error(const std::function<double()>& loss,
                                   const std::vector<TensorRef>& tensors,
                                   const std::vector<ConstTensorRef>& analytic,
                                   double step = 1e-6);

/// One randomized single-step gradient check of the given cell kind: random
/// small spec, random parameters, input and state; the analytic backward pass
/// (covering parameters, the input and both incoming states) is compared
/// against finite differences of a randomly weighted scalar readout.
/// corrupt_analytic injects an error into the analytic gradient, for testing
/// the detector itself.
double cell_gradcheck_trial(CellKind kind, std::uint64_t seed,
                            bool corrupt_analytic = false);

}  // namespace gcrn
