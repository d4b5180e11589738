#pragma once

#include <cstdint>
#include <vector>

namespace ctca {

// One warmup window: lr climbs from 0 to lr_max over `duration` iterations
// starting at `start`, then holds lr_max until the next window begins.
struct WarmupSegment {
    int64_t start = 0;
    int64_t duration = 1;
    double lr_max = 0.0;
};

class WarmupSchedule {
public:
    explicit WarmupSchedule(std::vector<WarmupSegment> segments);

    // (0,10000,3e-4), (200000,10000,0.7e-4), (400000,10000,0.175e-4)
    static WarmupSchedule base_preset();
    // Flat lr at every iteration, no warmup (finetuning).
    static WarmupSchedule constant(double lr);

    double lr_at(int64_t iteration) const;

    // Rescales all starts and durations by total_iters/reference so short desk
    // trainings keep the same three-phase shape.
    WarmupSchedule scaled_to(int64_t total_iters, int64_t reference_total) const;

    bool is_constant() const { return constant_; }
    const std::vector<WarmupSegment>& segments() const { return segments_; }

private:
    WarmupSchedule() = default;

    std::vector<WarmupSegment> segments_;
    bool constant_ = false;
    double constant_lr_ = 0.0;
};

} // namespace ctca
