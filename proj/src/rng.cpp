#include "stfmri/rng.hpp"

namespace stfmri {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t root, std::string_view stage, std::uint64_t unit) {
    std::uint64_t tag = 0xcbf29ce484222325ULL;
    for (const unsigned char c : stage) {
        tag ^= c;
        tag *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(splitmix64(root) ^ tag) ^ unit);
}

std::mt19937_64 make_stream(std::uint64_t root, std::string_view stage, std::uint64_t unit) {
    return std::mt19937_64(stream_seed(root, stage, unit));
}

}  // namespace stfmri
