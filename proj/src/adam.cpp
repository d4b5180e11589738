#include "ctca/adam.hpp"

#include <cmath>

namespace ctca {

AdamState::AdamState(const std::vector<Tensor>& params, double beta1, double beta2,
                     double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("AdamState: betas must lie in (0, 1)");
    }
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor& p : params) {
        m_.push_back(Tensor::zeros(p.shape));
        v_.push_back(Tensor::zeros(p.shape));
    }
}

void AdamState::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("AdamState: parameter list size changed since init");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        const Tensor& g = grads[pi];
        if (!p.same_shape(m_[pi]) || !g.same_shape(p)) {
            throw ShapeError("AdamState: shape mismatch at parameter " + std::to_string(pi));
        }
        double* mp = m_[pi].data.data();
        double* vp = v_[pi].data.data();
        double* pp = p.data.data();
        const double* gp = g.data.data();
        const size_t n = p.data.size();
        for (size_t i = 0; i < n; ++i) {
            mp[i] = beta1_ * mp[i] + (1.0 - beta1_) * gp[i];
            vp[i] = beta2_ * vp[i] + (1.0 - beta2_) * gp[i] * gp[i];
            const double mhat = mp[i] / bc1;
            const double vhat = vp[i] / bc2;
            pp[i] -= lr * mhat / (std::sqrt(vhat) + epsilon_);
        }
    }
}

void AdamState::restore(int64_t step_count, std::vector<Tensor> m, std::vector<Tensor> v) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
        throw CheckpointError("AdamState: restored moment count does not match parameters");
    }
    for (size_t i = 0; i < m.size(); ++i) {
        if (!m[i].same_shape(m_[i]) || !v[i].same_shape(v_[i])) {
            throw CheckpointError("AdamState: restored moment shape mismatch at " +
                                  std::to_string(i));
        }
    }
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace ctca
