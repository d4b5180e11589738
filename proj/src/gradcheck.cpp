#include "ctca/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "ctca/rng.hpp"

namespace ctca {

namespace {

FdReport check_coords(const ScalarFn& f, std::vector<Tensor> params, double eps,
                      const std::vector<std::vector<int64_t>>& coords) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be > 0");
    std::vector<Tensor> grads;
    const double base = f(params, &grads);
    const double base2 = f(params, nullptr);
    if (base != base2) {
        throw ShapeError("finite_diff_check: function is not deterministic (" +
                         std::to_string(base) + " vs " + std::to_string(base2) + ")");
    }
    if (grads.size() != params.size()) {
        throw ShapeError("finite_diff_check: expected " + std::to_string(params.size()) +
                         " gradient tensors, got " + std::to_string(grads.size()));
    }
    FdReport rep;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        if (!grads[pi].same_shape(params[pi])) {
            throw ShapeError("finite_diff_check: gradient " + std::to_string(pi) +
                             " shape " + grads[pi].shape_str() + " does not match parameter " +
                             params[pi].shape_str());
        }
        double diff_sq = 0.0, fd_sq = 0.0, an_sq = 0.0;
        for (int64_t ci : coords[pi]) {
            const double saved = params[pi].at(ci);
            params[pi].at(ci) = saved + eps;
            const double up = f(params, nullptr);
            params[pi].at(ci) = saved - eps;
            const double dn = f(params, nullptr);
            params[pi].at(ci) = saved;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = grads[pi].at(ci);
            const double abs_err = std::abs(fd - an);
            const double rel = abs_err / std::max(1e-8, std::abs(fd) + std::abs(an));
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = pi;
                rep.worst_coord = ci;
            }
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            diff_sq += abs_err * abs_err;
            fd_sq += fd * fd;
            an_sq += an * an;
        }
        // Tensor-level norm ratio: immune to individual near-zero gradient
        // coordinates where the pointwise relative error is meaningless.
        if (!coords[pi].empty()) {
            const double denom = std::max(1e-8, std::sqrt(fd_sq) + std::sqrt(an_sq));
            rep.max_tensor_rel_err =
                std::max(rep.max_tensor_rel_err, std::sqrt(diff_sq) / denom);
        }
    }
    return rep;
}

}  // namespace

FdReport finite_diff_check(const ScalarFn& f, std::vector<Tensor> params, double eps) {
    std::vector<std::vector<int64_t>> coords(params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
        coords[pi].resize(static_cast<size_t>(params[pi].numel()));
        for (int64_t i = 0; i < params[pi].numel(); ++i) coords[pi][static_cast<size_t>(i)] = i;
    }
    return check_coords(f, std::move(params), eps, coords);
}

FdReport finite_diff_check_sampled(const ScalarFn& f, std::vector<Tensor> params, double eps,
                                   int coords_per_tensor, uint64_t seed) {
    RngStream rng(seed);
    std::vector<std::vector<int64_t>> coords(params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const int64_t n = params[pi].numel();
        if (n <= coords_per_tensor) {
            coords[pi].resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[pi][static_cast<size_t>(i)] = i;
        } else {
            for (int c = 0; c < coords_per_tensor; ++c) {
                coords[pi].push_back(rng.uniform_int(0, n - 1));
            }
        }
    }
    return check_coords(f, std::move(params), eps, coords);
}

}  // namespace ctca
