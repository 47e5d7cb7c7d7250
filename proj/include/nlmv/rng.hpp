#pragma once

#include <cstdint>
#include <random>

namespace nlmv {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Fixed block size for all Monte Carlo loops: paths are split into blocks,
/// each block draws from its own substream, and partial results are merged
/// in block order. Output is therefore independent of the worker count.
inline constexpr int kBlockSize = 8192;

inline int num_blocks(long paths) {
    return static_cast<int>((paths + kBlockSize - 1) / kBlockSize);
}

/// Substream for one (seed, stream, block) triple.
class BlockRng {
public:
    BlockRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block)
        : eng_(splitmix64(splitmix64(seed ^ (0xA24BAED4963EE407ULL * (stream + 1))) +
                          0x9E6C63D0876A9ULL * (block + 1))) {}

    double normal() { return normal_(eng_); }
    double uniform() { return uniform_(eng_); }
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace nlmv
