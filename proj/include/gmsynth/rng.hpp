#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gmsynth {

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a hash, stable across platforms.
std::uint64_t hash_string(std::string_view s);

/// Key of an independent random stream; depends only on its arguments,
/// never on the order in which streams are created.
std::uint64_t stream_key(std::uint64_t seed, std::string_view label, std::uint64_t index);
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

class RandomStream {
public:
    explicit RandomStream(std::uint64_t key);

    double normal() { return normal_(engine_); }
    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<double> standard_normals(std::uint64_t key, std::size_t n);

}  // namespace gmsynth
