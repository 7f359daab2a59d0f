#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace smlc {

// Deterministic generator used everywhere randomness is needed. A hand-rolled
// splitmix64 core keeps sequences identical across platforms and standard
// library versions, which std::uniform_real_distribution does not guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; draws two uniforms per call and discards the second variate.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n)
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

private:
    uint64_t state_;
};

// FNV-1a over a label, mixed into the root seed. All randomness in the toolkit
// flows from one root seed, fanned out by named substreams (e.g. "init",
// "batches", "synth") so stages stay independently reproducible.
inline uint64_t substream_seed(uint64_t root, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return root ^ h;
}

inline uint64_t substream_seed(uint64_t root, std::string_view label, uint64_t index) {
    uint64_t h = substream_seed(root, label);
    h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

// Fisher-Yates shuffle driven by our Rng, so permutations are reproducible.
template <typename Container>
void shuffle(Container& c, Rng& rng) {
    for (size_t i = c.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(c[i - 1], c[j]);
    }
}

} // namespace smlc
