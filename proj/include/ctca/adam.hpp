#pragma once

#include <vector>

#include "ctca/tensor.hpp"

namespace ctca {

// Bias-corrected Adam over a fixed parameter list. Moment layout mirrors the
// parameter list; step() is deterministic and allocation-free after init.
class AdamState {
public:
    AdamState(const std::vector<Tensor>& params, double beta1 = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8);

    void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr);

    int64_t step_count() const { return step_count_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double epsilon() const { return epsilon_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

    // Checkpoint restore.
    void restore(int64_t step_count, std::vector<Tensor> m, std::vector<Tensor> v);

private:
    double beta1_, beta2_, epsilon_;
    int64_t step_count_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace ctca
