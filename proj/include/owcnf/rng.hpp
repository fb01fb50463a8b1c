#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace owcnf {

/// SplitMix64 as a UniformRandomBitGenerator. Small state, so one instance per
/// (stream, entry) key is cheap; this is how every seeded draw in the project
/// stays reproducible independent of evaluation order.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Order-sensitive hash of a seed with a list of counters.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t h = seed;
    for (std::uint64_t c : counters) {
        SplitMix64 g(h ^ (c + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)));
        h = g();
    }
    return h;
}

} // namespace owcnf
