#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctca/common.hpp"

namespace ctca {

// Dense row-major tensor of 64-bit floats. Values are plain data; autodiff
// bookkeeping lives on the Tape, not here.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape_in);
    Tensor(std::vector<int64_t> shape_in, std::vector<double> data_in);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(std::vector<int64_t> shape_in) { return Tensor(std::move(shape_in)); }
    static Tensor full(std::vector<int64_t> shape_in, double v);

    int64_t numel() const;
    int64_t dim(size_t i) const { return shape.at(i); }
    size_t ndim() const { return shape.size(); }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

// Handle to a tape slot.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Operations append one record each; backward() replays
// the records once, in reverse, accumulating into per-slot gradient buffers.
// A tape and the Vars minted from it belong to a single training step on a
// single worker.
class Tape {
public:
    // Leaf with gradient tracking (parameters, test probes).
    Var leaf(Tensor value);
    // Leaf without gradient tracking (inputs, constants).
    Var constant(Tensor value);

    const Tensor& value(Var v) const;
    // Gradient of the last backward() target w.r.t. this slot. Zero tensor
    // for tracked slots never touched by the loss.
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const;

    // Reverse pass from a scalar loss. Throws ShapeError for non-scalar.
    void backward(Var loss);

    size_t num_records() const { return records_.size(); }

    // --- for use by op implementations ---
    Var push(Tensor value, bool track, std::function<void(Tape&)> backward_fn);
    // Attach the reverse step after push, so the closure can capture the
    // output handle. Only valid on the most recent record.
    void set_backward(Var v, std::function<void(Tape&)> backward_fn);
    Tensor& grad_mut(Var v);

private:
    struct Slot {
        Tensor value;
        Tensor grad;
        bool track = false;
    };
    struct Record {
        std::function<void(Tape&)> backward_fn;  // empty for leaves
    };
    Slot& slot(Var v);
    const Slot& slot(Var v) const;

    std::vector<Slot> slots_;
    std::vector<Record> records_;
};

}  // namespace ctca
