#pragma once

// Counter-based deterministic random stream.
//
// Every word is a pure function of (seed, stream_id, index): no state is
// carried between draws, so a field can be processed by any number of
// threads in any order and still produce bit-identical results. Streams are
// keyed per pixel (stream_id = flat pixel index) by the field drivers.
//
// Index layout: uniform_at(k) consumes word k; normal_at(k) consumes words
// 2k and 2k+1 (Box-Muller, cosine branch). Callers mixing both families on
// one stream must keep the word indices disjoint.

#include <cmath>
#include <cstdint>

namespace logitconf {

inline constexpr uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Folds a salt into a seed; used to give ensemble members independent streams.
inline constexpr uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ salt);
}

struct DeterministicStream {
    uint64_t seed = 0;
    uint64_t stream_id = 0;
    uint64_t counter = 0; // cursor for the next_* convenience calls

    uint64_t word_at(uint64_t k) const {
        return splitmix64(splitmix64(splitmix64(seed) ^ stream_id) ^ k);
    }

    // Uniform in the open interval (0,1); safe for log().
    double uniform_at(uint64_t k) const {
        return (static_cast<double>(word_at(k) >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal_at(uint64_t k) const {
        const double u1 = uniform_at(2 * k);
        const double u2 = uniform_at(2 * k + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double next_uniform() { return uniform_at(counter++); }

    double next_normal() {
        const double u1 = uniform_at(counter++);
        const double u2 = uniform_at(counter++);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }
};

} // namespace logitconf
