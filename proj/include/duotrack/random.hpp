#pragma once

#include <cstdint>
#include <random>

namespace duotrack {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Sub-seed for stream `index` derived from a master seed. Streams are
/// independent of how many of them are drawn and in which order.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ull * (index + 1));
    std::uint64_t s = detail::splitmix64(state);
    s = detail::splitmix64(state);
    return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(substream_seed(seed, index));
}

}  // namespace duotrack
