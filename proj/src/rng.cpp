#include "ctca/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctca {

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t x = splitmix64(s);
    s = x ^ b;
    return splitmix64(s);
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream::RngStream(uint64_t root_seed, uint64_t stream_index)
    : key_(mix_seed(root_seed, stream_index)), engine_(key_) {}

RngStream RngStream::substream(uint64_t index) const {
    return RngStream(key_, index + 1);
}

uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<int64_t>(next_u64());  // full 64-bit range
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int64_t>(draw % span);
}

double RngStream::gauss(double mean, double sigma) {
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<size_t> RngStream::permutation(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace ctca
