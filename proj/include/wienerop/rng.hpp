#pragma once

#include <cstdint>
#include <random>

namespace wienerop {

/// Generator for one sample, keyed by (seed, stream, sample index). Any
/// sample can be regenerated alone, so batch results do not depend on how
/// samples are split across chunks or threads.
inline std::mt19937_64 sample_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(index), hi(index)};
    return std::mt19937_64(seq);
}

}  // namespace wienerop
