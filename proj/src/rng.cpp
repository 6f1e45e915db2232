#include "gmsynth/rng.hpp"

namespace gmsynth {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    return stream_key(seed, hash_string(label), index);
}

RandomStream::RandomStream(std::uint64_t key) {
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(splitmix64(key)),
                      static_cast<std::uint32_t>(splitmix64(key) >> 32)};
    engine_.seed(seq);
}

std::vector<double> standard_normals(std::uint64_t key, std::size_t n) {
    RandomStream rs(key);
    std::vector<double> z(n);
    for (auto& v : z) v = rs.normal();
    return z;
}

}  // namespace gmsynth
