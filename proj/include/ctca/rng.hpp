#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ctca {

// Deterministic, splittable random streams. The mt19937_64 engine is fully
// specified by the standard; the distribution transforms below are our own,
// so sampled values are bit-identical across platforms (the std::*
// distributions are implementation-defined and must not be used here).
class RngStream {
public:
    explicit RngStream(uint64_t root_seed, uint64_t stream_index = 0);

    // Independent child stream; derivation is a hash of (key, index).
    RngStream substream(uint64_t index) const;

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Inclusive range. Unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Box-Muller without spare caching.
    double gauss(double mean = 0.0, double sigma = 1.0);

    // Fisher-Yates over indices [0, n).
    std::vector<size_t> permutation(size_t n);

    uint64_t key() const { return key_; }

private:
    uint64_t key_;
    std::mt19937_64 engine_;
};

// splitmix64 mixing step, also used for content hashing of seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

// FNV-1a over raw bytes; stable fingerprint for goldens and output naming.
uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace ctca
