#include "ctca/tensor.hpp"

#include <sstream>

namespace ctca {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {
void check_shape(const std::vector<int64_t>& shape) {
    for (int64_t d : shape) {
        if (d < 1) throw ShapeError("tensor dimension must be >= 1, got shape " + shape_to_string(shape));
    }
    if (shape.empty()) throw ShapeError("tensor rank must be >= 1");
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape_in) : shape(std::move(shape_in)) {
    check_shape(shape);
    data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    check_shape(shape);
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
}

Tensor Tensor::full(std::vector<int64_t> shape_in, double v) {
    Tensor t(std::move(shape_in));
    for (double& x : t.data) x = v;
    return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

std::string Tensor::shape_str() const { return shape_to_string(shape); }

Tape::Slot& Tape::slot(Var v) {
    if (!v.valid() || static_cast<size_t>(v.id) >= slots_.size()) {
        throw std::logic_error("invalid tape variable");
    }
    return slots_[static_cast<size_t>(v.id)];
}

const Tape::Slot& Tape::slot(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= slots_.size()) {
        throw std::logic_error("invalid tape variable");
    }
    return slots_[static_cast<size_t>(v.id)];
}

Var Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::push(Tensor value, bool track, std::function<void(Tape&)> backward_fn) {
    Var v{static_cast<int32_t>(slots_.size())};
    Slot s;
    s.value = std::move(value);
    s.track = track;
    slots_.push_back(std::move(s));
    records_.push_back(Record{std::move(backward_fn)});
    return v;
}

void Tape::set_backward(Var v, std::function<void(Tape&)> backward_fn) {
    if (!v.valid() || static_cast<size_t>(v.id) + 1 != records_.size()) {
        throw std::logic_error("set_backward: not the most recent record");
    }
    records_[static_cast<size_t>(v.id)].backward_fn = std::move(backward_fn);
}

const Tensor& Tape::value(Var v) const { return slot(v).value; }

bool Tape::requires_grad(Var v) const { return slot(v).track; }

const Tensor& Tape::grad(Var v) const {
    const Slot& s = slot(v);
    if (!s.track) throw std::logic_error("grad() on an untracked tape slot");
    return s.grad;
}

Tensor& Tape::grad_mut(Var v) { return slot(v).grad; }

void Tape::backward(Var loss) {
    const Slot& ls = slot(loss);
    if (ls.value.numel() != 1) {
        throw ShapeError("backward() expects a scalar loss, got shape " + ls.value.shape_str());
    }
    // (Re)initialize gradient buffers for tracked slots.
    for (Slot& s : slots_) {
        if (s.track) {
            s.grad = Tensor::zeros(s.value.shape);
        } else {
            s.grad = Tensor();
        }
    }
    if (!ls.track) return;  // loss does not depend on any tracked slot
    slot(loss).grad.data[0] = 1.0;
    for (size_t i = records_.size(); i-- > 0;) {
        if (records_[i].backward_fn) records_[i].backward_fn(*this);
    }
}

}  // namespace ctca
