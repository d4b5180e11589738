#pragma once

#include <functional>
#include <vector>

#include "ctca/tensor.hpp"

namespace ctca {

// Scalar function of a parameter list. When grads_out is non-null the callee
// must fill it with one gradient tensor per parameter (analytic, via the
// tape); when null only the value is needed.
using ScalarFn =
    std::function<double(const std::vector<Tensor>& params, std::vector<Tensor>* grads_out)>;

struct FdReport {
    double max_rel_err = 0.0;         // worst single coordinate
    double max_abs_err = 0.0;
    double max_tensor_rel_err = 0.0;  // worst per-tensor gradient norm ratio
    size_t worst_param = 0;
    int64_t worst_coord = 0;
};

// Central-difference check of every coordinate of every parameter against the
// analytic gradient. Throws std::invalid_argument for eps <= 0 and
// ShapeError if two evaluations at the same point disagree (f must be
// deterministic).
FdReport finite_diff_check(const ScalarFn& f, std::vector<Tensor> params, double eps);

// Same check restricted to a per-tensor sample of coordinates; used where a
// full sweep is too slow. Coordinates are chosen deterministically from seed.
FdReport finite_diff_check_sampled(const ScalarFn& f, std::vector<Tensor> params, double eps,
                                   int coords_per_tensor, uint64_t seed);

}  // namespace ctca
