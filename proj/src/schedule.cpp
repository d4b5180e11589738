#include "ctca/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctca/common.hpp"

namespace ctca {

WarmupSchedule::WarmupSchedule(std::vector<WarmupSegment> segments)
    : segments_(std::move(segments)) {
    if (segments_.empty()) {
        throw ConfigError("WarmupSchedule: need at least one segment");
    }
    for (size_t i = 0; i < segments_.size(); ++i) {
        const WarmupSegment& s = segments_[i];
        if (s.start < 0) {
            throw ConfigError("WarmupSchedule: segment " + std::to_string(i) +
                              " has negative start");
        }
        if (s.duration < 1) {
            throw ConfigError("WarmupSchedule: segment " + std::to_string(i) +
                              " has non-positive duration");
        }
        if (!(s.lr_max >= 0.0)) {
            throw ConfigError("WarmupSchedule: segment " + std::to_string(i) +
                              " has negative lr_max");
        }
        if (i > 0) {
            const WarmupSegment& prev = segments_[i - 1];
            if (s.start < prev.start + prev.duration) {
                throw ConfigError("WarmupSchedule: segment " + std::to_string(i) +
                                  " overlaps the previous warmup window");
            }
        }
    }
}

WarmupSchedule WarmupSchedule::base_preset() {
    return WarmupSchedule({{0, 10000, 3e-4},
                           {200000, 10000, 0.7e-4},
                           {400000, 10000, 0.175e-4}});
}

WarmupSchedule WarmupSchedule::constant(double lr) {
    if (!(lr >= 0.0)) {
        throw ConfigError("WarmupSchedule::constant: negative lr");
    }
    WarmupSchedule s;
    s.constant_ = true;
    s.constant_lr_ = lr;
    return s;
}

double WarmupSchedule::lr_at(int64_t iteration) const {
    if (iteration < 0) {
        throw ConfigError("lr_at: negative iteration");
    }
    if (constant_) return constant_lr_;
    double held = 0.0;
    for (const WarmupSegment& s : segments_) {
        if (iteration < s.start) break;
        if (iteration >= s.start + s.duration) {
            held = s.lr_max;
            continue;
        }
        const double t = static_cast<double>(iteration - s.start);
        const double frac = t / static_cast<double>(s.duration);
        return s.lr_max * frac * frac * frac;
    }
    return held;
}

WarmupSchedule WarmupSchedule::scaled_to(int64_t total_iters, int64_t reference_total) const {
    if (total_iters < 1 || reference_total < 1) {
        throw ConfigError("scaled_to: iteration counts must be positive");
    }
    if (constant_) return *this;
    const double ratio = static_cast<double>(total_iters) / static_cast<double>(reference_total);
    std::vector<WarmupSegment> scaled;
    scaled.reserve(segments_.size());
    for (const WarmupSegment& s : segments_) {
        WarmupSegment n;
        n.start = std::llround(static_cast<double>(s.start) * ratio);
        n.duration = std::max<int64_t>(1, std::llround(static_cast<double>(s.duration) * ratio));
        n.lr_max = s.lr_max;
        if (!scaled.empty()) {
            const WarmupSegment& prev = scaled.back();
            n.start = std::max(n.start, prev.start + prev.duration);
        }
        scaled.push_back(n);
    }
    return WarmupSchedule(std::move(scaled));
}

} // namespace ctca
